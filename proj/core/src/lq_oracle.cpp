#include "hjbadp/lq_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>

#include <Eigen/Cholesky>

namespace hjbadp {

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw DimensionError("matrix_exponential: matrix must be square");
  if (!m.allFinite()) throw NumericError("matrix_exponential: non-finite input");
  const Eigen::Index n = m.rows();
  double norm = m.cwiseAbs().rowwise().sum().maxCoeff();  // infinity norm
  int squarings = 0;
  while (norm > 0.5) {
    norm *= 0.5;
    ++squarings;
  }
  const Eigen::MatrixXd ms = m / std::pow(2.0, squarings);
  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k <= 30; ++k) {
    term = (term * ms / static_cast<double>(k)).eval();
    result += term;
    if (k >= 12 && term.cwiseAbs().maxCoeff() < 1e-18 * result.cwiseAbs().maxCoeff()) break;
  }
  for (int i = 0; i < squarings; ++i) result = (result * result).eval();
  return result;
}

DiscreteLti discretize(const LinearDynamics& dyn, double h, DiscretizeMethod method) {
  if (!(h > 0.0)) throw ConfigError("discretize: step h must be positive");
  DiscreteLti out;
  out.h = h;
  switch (method) {
    case DiscretizeMethod::kEuler:
      out.ad = Eigen::Matrix4d::Identity() + h * dyn.A;
      out.bd = h * dyn.B;
      return out;
    case DiscretizeMethod::kZoh: {
      Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(5, 5);
      aug.topLeftCorner(4, 4) = dyn.A;
      aug.topRightCorner(4, 1) = dyn.B;
      const Eigen::MatrixXd e = matrix_exponential(aug * h);
      out.ad = e.topLeftCorner(4, 4);
      out.bd = e.topRightCorner(4, 1);
      return out;
    }
  }
  throw ConfigError("discretize: unknown method");
}

void BatchLqProblem::validate() const {
  const Eigen::Index n = ad.rows();
  if (ad.cols() != n || n == 0) throw DimensionError("batch LQ: ad must be square");
  if (bd.size() != n) throw DimensionError("batch LQ: bd length must match ad");
  if (qm.rows() != n || qm.cols() != n) throw DimensionError("batch LQ: qm must be n x n");
  if (p_term.rows() != n || p_term.cols() != n) throw DimensionError("batch LQ: p_term must be n x n");
  if (!(rm > 0.0)) throw ConfigError("batch LQ: rm must be positive");
  if (n_steps < 1) throw ConfigError("batch LQ: n_steps must be at least 1");
  if (!(h > 0.0)) throw ConfigError("batch LQ: step h must be positive");
}

BatchLqMatrices build_batch_matrices(const BatchLqProblem& p) {
  p.validate();
  const Eigen::Index n = p.ad.rows();
  const int N = p.n_steps;
  BatchLqMatrices m;
  m.s_bar = Eigen::MatrixXd::Zero(n * N, N);
  m.t_bar = Eigen::MatrixXd::Zero(n * N, n);
  m.q_bar = Eigen::MatrixXd::Zero(n * N, n * N);
  m.r_bar = p.rm * Eigen::MatrixXd::Identity(N, N);

  // Ad^k Bd for k = 0..N-1 and Ad^(i+1) for the prediction blocks.
  std::vector<Eigen::VectorXd> impulse(static_cast<size_t>(N));
  impulse[0] = p.bd;
  for (int k = 1; k < N; ++k) impulse[k] = p.ad * impulse[k - 1];
  Eigen::MatrixXd power = p.ad;
  for (int i = 0; i < N; ++i) {
    m.t_bar.block(n * i, 0, n, n) = power;
    if (i + 1 < N) power = (p.ad * power).eval();
  }
  for (int i = 0; i < N; ++i) {
    for (int j = 0; j <= i; ++j) {
      m.s_bar.block(n * i, j, n, 1) = impulse[static_cast<size_t>(i - j)];
    }
  }
  for (int i = 0; i < N; ++i) {
    m.q_bar.block(n * i, n * i, n, n) = (i == N - 1) ? p.p_term : p.qm;
  }
  return m;
}

namespace {

// H and F of the stacked quadratic in U: J = U'(H/2)U + x0' F' U + const.
void batch_normal_equations(const BatchLqProblem& p, Eigen::MatrixXd& H, Eigen::MatrixXd& F) {
  const BatchLqMatrices m = build_batch_matrices(p);
  const Eigen::MatrixXd qs = m.q_bar * m.s_bar;
  H = 2.0 * (m.r_bar + m.s_bar.transpose() * qs);
  F = 2.0 * (qs.transpose() * m.t_bar);
}

Eigen::LLT<Eigen::MatrixXd> factor_h(const Eigen::MatrixXd& H) {
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) {
    throw ConditioningError("batch LQ: Cholesky factorization of H failed");
  }
  return llt;
}

}  // namespace

Eigen::VectorXd batch_lq_solve(const BatchLqProblem& p, const Eigen::Ref<const Eigen::VectorXd>& x0) {
  if (x0.size() != p.ad.rows()) throw DimensionError("batch_lq_solve: x0 length must match ad");
  Eigen::MatrixXd H, F;
  batch_normal_equations(p, H, F);
  const Eigen::VectorXd rhs = -(F * x0);
  const Eigen::VectorXd u = factor_h(H).solve(rhs);
  if (!u.allFinite()) throw ConditioningError("batch_lq_solve: non-finite solution");
  return u;
}

Eigen::RowVectorXd first_move_gain(const BatchLqProblem& p) {
  Eigen::MatrixXd H, F;
  batch_normal_equations(p, H, F);
  const Eigen::MatrixXd y = factor_h(H).solve(F);
  if (!y.allFinite()) throw ConditioningError("first_move_gain: non-finite solution");
  return y.row(0);
}

std::vector<Eigen::RowVectorXd> riccati_solve(const BatchLqProblem& p) {
  p.validate();
  std::vector<Eigen::RowVectorXd> gains(static_cast<size_t>(p.n_steps));
  Eigen::MatrixXd pk = p.p_term;
  for (int k = p.n_steps - 1; k >= 0; --k) {
    const Eigen::VectorXd pb = pk * p.bd;
    const double s = p.rm + p.bd.dot(pb);
    if (!(s > 0.0)) throw ConditioningError("riccati_solve: non-positive control curvature");
    const Eigen::RowVectorXd gain = (p.bd.transpose() * pk * p.ad) / s;
    gains[static_cast<size_t>(k)] = gain;
    if (k > 0) {
      pk = p.qm + p.ad.transpose() * pk * (p.ad - p.bd * gain);
      pk = (0.5 * (pk + pk.transpose())).eval();
      if (!pk.allFinite()) throw ConditioningError("riccati_solve: non-finite recursion");
    }
  }
  return gains;
}

Eigen::VectorXd riccati_control_sequence(const BatchLqProblem& p,
                                         const Eigen::Ref<const Eigen::VectorXd>& x0) {
  if (x0.size() != p.ad.rows()) throw DimensionError("riccati_control_sequence: x0 length mismatch");
  const std::vector<Eigen::RowVectorXd> gains = riccati_solve(p);
  Eigen::VectorXd u(p.n_steps);
  Eigen::VectorXd x = x0;
  for (int k = 0; k < p.n_steps; ++k) {
    u(k) = -gains[static_cast<size_t>(k)].dot(x);
    x = p.ad * x + p.bd * u(k);
  }
  return u;
}

PolicyErrorEvaluator::PolicyErrorEvaluator(const BatchLqProblem& base, std::vector<TestPoint> points,
                                           double control_bound)
    : points_(std::move(points)) {
  base.validate();
  if (points_.empty()) throw ConfigError("policy_error: empty test set");
  const double t_final = static_cast<double>(base.n_steps) * base.h;
  std::map<int, Eigen::RowVectorXd> gain_by_steps;
  u_star_.reserve(points_.size());
  for (const TestPoint& pt : points_) {
    if (pt.x.size() != base.ad.rows()) {
      throw DimensionError("policy_error: test state length must match the model");
    }
    long steps = std::lround((t_final - pt.t) / base.h);
    steps = std::clamp(steps, 1L, static_cast<long>(base.n_steps));
    auto it = gain_by_steps.find(static_cast<int>(steps));
    if (it == gain_by_steps.end()) {
      BatchLqProblem sub = base;
      sub.n_steps = static_cast<int>(steps);
      it = gain_by_steps.emplace(static_cast<int>(steps), first_move_gain(sub)).first;
    }
    u_star_.push_back(-it->second.dot(pt.x));
  }
  const auto [mn, mx] = std::minmax_element(u_star_.begin(), u_star_.end());
  range_ = *mx - *mn;
  if (!(range_ > 1e-12)) {
    throw DegenerateNormalizationError("policy_error: oracle control range is degenerate");
  }
  for (double u : u_star_) {
    if (std::fabs(u) > control_bound + 1e-12) ++bound_violations_;
  }
}

PolicyErrorStats PolicyErrorEvaluator::evaluate(const Controller& policy) const {
  PolicyErrorStats stats;
  stats.u_star_min = *std::min_element(u_star_.begin(), u_star_.end());
  stats.u_star_max = *std::max_element(u_star_.begin(), u_star_.end());
  stats.bound_violations = bound_violations_;
  double sum_abs = 0.0, sum_signed = 0.0;
  for (size_t i = 0; i < points_.size(); ++i) {
    const double diff = policy(points_[i].x, points_[i].t) - u_star_[i];
    sum_abs += std::fabs(diff);
    sum_signed += diff;
  }
  const double inv = 1.0 / (static_cast<double>(points_.size()) * range_);
  stats.mean_abs = sum_abs * inv;
  stats.mean_signed = sum_signed * inv;
  return stats;
}

double policy_error(const Controller& policy, const BatchLqProblem& p,
                    const std::vector<TestPoint>& test_points, bool signed_variant) {
  const PolicyErrorEvaluator eval(p, test_points, std::numeric_limits<double>::infinity());
  const PolicyErrorStats stats = eval.evaluate(policy);
  return signed_variant ? stats.mean_signed : stats.mean_abs;
}

}  // namespace hjbadp
