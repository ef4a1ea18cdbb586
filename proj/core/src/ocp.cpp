#include "hjbadp/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

namespace hjbadp {

void Horizon::validate() const {
  if (!(dt > 0.0)) throw ConfigError("horizon.dt must be positive");
  if (!(t_final >= dt)) throw ConfigError("horizon.t_final must be at least one step");
}

Plant make_linear_plant(const LinearDynamics& dyn) {
  Plant p;
  p.state_dim = 4;
  const Eigen::Matrix4d A = dyn.A;
  const Eigen::Vector4d B = dyn.B;
  p.derivative = [A, B](const Eigen::Ref<const Eigen::VectorXd>& x, double u) -> Eigen::VectorXd {
    return A * x + B * u;
  };
  p.control_jacobian = [B](const Eigen::Ref<const Eigen::VectorXd>&, double) -> Eigen::VectorXd {
    return B;
  };
  p.derivative_batch = [A, B](const ConstMatRef& x, const ConstRowRef& u,
                              Eigen::Ref<Eigen::MatrixXd> out) {
    out.noalias() = A * x;
    out.noalias() += B * u;
  };
  p.control_jacobian_batch = [B](const ConstMatRef&, const ConstRowRef&,
                                 Eigen::Ref<Eigen::MatrixXd> out) { out.colwise() = B; };
  return p;
}

Plant make_kinematic_error_plant(const VehicleParams& vp) {
  vp.validate();
  const double vx = vp.vx, a = vp.a, b = vp.b;
  auto deriv2 = [vx, a, b](double phi, double delta, double& dd, double& dphi) {
    const double beta = std::atan(b * std::tan(delta) / (a + b));
    dd = vx * std::sin(phi + beta);
    dphi = vx / b * std::sin(beta);
  };
  Plant p;
  p.state_dim = 2;
  p.derivative = [deriv2](const Eigen::Ref<const Eigen::VectorXd>& x, double u) -> Eigen::VectorXd {
    Eigen::VectorXd out(2);
    deriv2(x(1), u, out(0), out(1));
    return out;
  };
  p.control_jacobian = [deriv2](const Eigen::Ref<const Eigen::VectorXd>& x,
                                double u) -> Eigen::VectorXd {
    const double h = 1e-6;
    double dp0, pp0, dm0, pm0;
    deriv2(x(1), u + h, dp0, pp0);
    deriv2(x(1), u - h, dm0, pm0);
    Eigen::VectorXd out(2);
    out(0) = (dp0 - dm0) / (2.0 * h);
    out(1) = (pp0 - pm0) / (2.0 * h);
    return out;
  };
  p.derivative_batch = [deriv2](const ConstMatRef& x, const ConstRowRef& u,
                                Eigen::Ref<Eigen::MatrixXd> out) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      double dd, dphi;
      deriv2(x(1, j), u(j), dd, dphi);
      out(0, j) = dd;
      out(1, j) = dphi;
    }
  };
  p.control_jacobian_batch = [deriv2](const ConstMatRef& x, const ConstRowRef& u,
                                      Eigen::Ref<Eigen::MatrixXd> out) {
    const double h = 1e-6;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      double dp, pp, dm, pm;
      deriv2(x(1, j), u(j) + h, dp, pp);
      deriv2(x(1, j), u(j) - h, dm, pm);
      out(0, j) = (dp - dm) / (2.0 * h);
      out(1, j) = (pp - pm) / (2.0 * h);
    }
  };
  return p;
}

double utility(const Eigen::Ref<const Eigen::VectorXd>& x, double u, const UtilityWeights& w) {
  if (x.size() < 1) throw DimensionError("utility: state must have at least one component");
  return w.q * x(0) * x(0) + w.r * u * u;
}

double hamiltonian(const Eigen::Ref<const Eigen::VectorXd>& x, double u,
                   const Eigen::Ref<const Eigen::VectorXd>& value_grad_x, const Plant& plant,
                   const UtilityWeights& w) {
  if (value_grad_x.size() != plant.state_dim || x.size() != plant.state_dim) {
    throw DimensionError("hamiltonian: state and value gradient must match plant.state_dim");
  }
  return utility(x, u, w) + value_grad_x.dot(plant.derivative(x, u));
}

Eigen::VectorXd rk4_step(const Plant& plant, const Eigen::Ref<const Eigen::VectorXd>& x,
                         const Controller& control, double t, double dt) {
  if (x.size() != plant.state_dim) throw DimensionError("rk4_step: state size mismatch");
  const Eigen::VectorXd k1 = plant.derivative(x, control(x, t));
  const Eigen::VectorXd x2 = x + 0.5 * dt * k1;
  const Eigen::VectorXd k2 = plant.derivative(x2, control(x2, t + 0.5 * dt));
  const Eigen::VectorXd x3 = x + 0.5 * dt * k2;
  const Eigen::VectorXd k3 = plant.derivative(x3, control(x3, t + 0.5 * dt));
  const Eigen::VectorXd x4 = x + dt * k3;
  const Eigen::VectorXd k4 = plant.derivative(x4, control(x4, t + dt));
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

namespace {

struct StepPlan {
  long full_steps = 0;
  double last_step = 0.0;
  long total_steps = 0;
};

StepPlan plan_steps(double t, double t_final, double dt) {
  const double remaining = t_final - t;
  if (remaining < -1e-9 * std::max(1.0, std::fabs(t_final))) {
    throw ContractError("rollout start time lies beyond the horizon");
  }
  StepPlan plan;
  if (remaining <= 0.0) return plan;
  plan.full_steps = static_cast<long>(std::floor(remaining / dt + 1e-9));
  plan.last_step = remaining - static_cast<double>(plan.full_steps) * dt;
  if (plan.last_step < 1e-12) plan.last_step = 0.0;
  plan.total_steps = plan.full_steps + (plan.last_step > 0.0 ? 1 : 0);
  return plan;
}

}  // namespace

TerminalRollout rollout_terminal(const Controller& policy, const OcpInstance& ocp,
                                 const Eigen::Ref<const Eigen::VectorXd>& x, double t) {
  ocp.horizon.validate();
  if (x.size() != ocp.plant.state_dim) throw DimensionError("rollout_terminal: state size mismatch");
  const StepPlan plan = plan_steps(t, ocp.horizon.t_final, ocp.horizon.dt);
  Eigen::VectorXd cur = x;
  double tau = t;
  for (long i = 0; i < plan.full_steps; ++i) {
    cur = rk4_step(ocp.plant, cur, policy, tau, ocp.horizon.dt);
    tau += ocp.horizon.dt;
    if (!cur.allFinite()) throw BlowupError("rollout_terminal: non-finite state");
  }
  if (plan.last_step > 0.0) {
    cur = rk4_step(ocp.plant, cur, policy, tau, plan.last_step);
    if (!cur.allFinite()) throw BlowupError("rollout_terminal: non-finite state");
  }
  TerminalRollout out;
  out.x_final = cur;
  out.u_final = policy(cur, ocp.horizon.t_final);
  out.utility_final = utility(cur, out.u_final, ocp.weights);
  return out;
}

namespace {

// Policy evaluation over the active prefix; writes the steering row.
class BatchPolicy {
 public:
  BatchPolicy(const MlpParams& policy, int state_dim, Eigen::Index m)
      : policy_(policy), n_(state_dim), inbuf_(state_dim + 1, m) {}

  // u(:, 0..m-1) for states X (n x m) at per-column times ts.
  Eigen::RowVectorXd operator()(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                const Eigen::Ref<const Eigen::RowVectorXd>& ts) {
    const Eigen::Index m = X.cols();
    inbuf_.topLeftCorner(n_, m) = X;
    inbuf_.block(n_, 0, 1, m) = ts;
    return mlp_forward_batch(policy_, inbuf_.topLeftCorner(n_ + 1, m), cache_).row(0);
  }

 private:
  const MlpParams& policy_;
  int n_;
  Eigen::MatrixXd inbuf_;
  ForwardCache cache_;
};

}  // namespace

BatchRollout rollout_terminal_batch(const MlpParams& policy, const OcpInstance& ocp,
                                    const ConstMatRef& x0,
                                    const Eigen::Ref<const Eigen::RowVectorXd>& t0) {
  ocp.horizon.validate();
  const int n = ocp.plant.state_dim;
  const Eigen::Index m = x0.cols();
  if (x0.rows() != n) throw DimensionError("rollout_terminal_batch: state rows != plant.state_dim");
  if (t0.size() != m) throw DimensionError("rollout_terminal_batch: one start time per column required");
  if (policy.input_width() != n + 1 || policy.output_width() != 1) {
    throw ContractError("rollout_terminal_batch: policy must map [x; t] to a scalar control");
  }
  const double t_final = ocp.horizon.t_final;
  const double dt = ocp.horizon.dt;

  std::vector<StepPlan> plans(static_cast<size_t>(m));
  for (Eigen::Index j = 0; j < m; ++j) plans[j] = plan_steps(t0(j), t_final, dt);

  // Process columns sorted by step count (descending) so active columns form
  // a prefix; output order is restored at the end.
  std::vector<Eigen::Index> order(static_cast<size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return plans[a].total_steps > plans[b].total_steps;
  });

  Eigen::MatrixXd X(n, m);
  Eigen::RowVectorXd tau(m);
  std::vector<long> full(m), total(m);
  std::vector<double> last(m);
  for (Eigen::Index jj = 0; jj < m; ++jj) {
    const Eigen::Index j = order[jj];
    X.col(jj) = x0.col(j);
    tau(jj) = t0(j);
    full[jj] = plans[j].full_steps;
    last[jj] = plans[j].last_step;
    total[jj] = plans[j].total_steps;
  }
  const long max_steps = (m > 0) ? total[0] : 0;

  BatchPolicy eval_policy(policy, n, m);
  Eigen::MatrixXd K1(n, m), K2(n, m), K3(n, m), K4(n, m), XS(n, m);
  Eigen::RowVectorXd h(m), ts(m), u(m);
  Eigen::Index active = m;
  for (long step = 0; step < max_steps; ++step) {
    while (active > 0 && total[active - 1] <= step) --active;
    if (active == 0) break;
    for (Eigen::Index j = 0; j < active; ++j) {
      h(j) = (step < full[j]) ? dt : last[j];
    }
    auto Xa = X.leftCols(active);
    const auto ha = h.head(active);

    u = eval_policy(Xa, tau.head(active));
    ocp.plant.derivative_batch(Xa, u.head(active), K1.leftCols(active));

    XS.leftCols(active) = Xa + K1.leftCols(active) * (0.5 * ha).asDiagonal();
    ts.head(active) = tau.head(active) + 0.5 * ha;
    u = eval_policy(XS.leftCols(active), ts.head(active));
    ocp.plant.derivative_batch(XS.leftCols(active), u.head(active), K2.leftCols(active));

    XS.leftCols(active) = Xa + K2.leftCols(active) * (0.5 * ha).asDiagonal();
    u = eval_policy(XS.leftCols(active), ts.head(active));
    ocp.plant.derivative_batch(XS.leftCols(active), u.head(active), K3.leftCols(active));

    XS.leftCols(active) = Xa + K3.leftCols(active) * ha.asDiagonal();
    ts.head(active) = tau.head(active) + ha;
    u = eval_policy(XS.leftCols(active), ts.head(active));
    ocp.plant.derivative_batch(XS.leftCols(active), u.head(active), K4.leftCols(active));

    Xa += (K1.leftCols(active) + 2.0 * K2.leftCols(active) + 2.0 * K3.leftCols(active) +
           K4.leftCols(active)) *
          (ha / 6.0).asDiagonal();
    tau.head(active) += ha;
    if ((step & 15) == 0 && !Xa.allFinite()) {
      throw BlowupError("rollout_terminal_batch: non-finite state");
    }
  }
  if (!X.allFinite()) throw BlowupError("rollout_terminal_batch: non-finite state");

  ts.setConstant(t_final);
  const Eigen::RowVectorXd u_final = eval_policy(X, ts);
  Eigen::RowVectorXd l_final(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    l_final(j) = ocp.weights.q * X(0, j) * X(0, j) + ocp.weights.r * u_final(j) * u_final(j);
  }

  BatchRollout out;
  out.x_final.resize(n, m);
  out.u_final.resize(m);
  out.utility_final.resize(m);
  for (Eigen::Index jj = 0; jj < m; ++jj) {
    const Eigen::Index j = order[jj];
    out.x_final.col(j) = X.col(jj);
    out.u_final(j) = u_final(jj);
    out.utility_final(j) = l_final(jj);
  }
  return out;
}

}  // namespace hjbadp
