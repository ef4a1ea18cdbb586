#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "hjbadp/errors.hpp"
#include "hjbadp/lq_oracle.hpp"

using namespace hjbadp;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

namespace {

MatrixXd random_matrix(int n, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixXd m(n, n);
  for (int i = 0; i < m.size(); ++i) m(i) = scale * gauss(rng);
  return m;
}

// random problem with a spectral radius kept near one so powers of Ad in the
// stacked matrices stay well conditioned
BatchLqProblem random_problem(std::mt19937_64& rng, int n, int n_steps) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.1, 2.0);
  BatchLqProblem p;
  p.ad = random_matrix(n, rng, 1.0);
  const double radius = p.ad.eigenvalues().cwiseAbs().maxCoeff();
  p.ad *= 0.95 / std::max(radius, 1e-6);
  p.bd = VectorXd::NullaryExpr(n, [&]() { return gauss(rng); });
  VectorXd qdiag = VectorXd::NullaryExpr(n, [&]() { return unif(rng); });
  p.qm = qdiag.asDiagonal();
  p.rm = unif(rng);
  p.p_term = p.qm;
  p.n_steps = n_steps;
  p.h = 0.005;
  return p;
}

BatchLqProblem vehicle_problem(int n_steps) {
  const LinearDynamics dyn = build_linear_dynamics(VehicleParams{});
  const DiscreteLti d = discretize(dyn, 0.005, DiscretizeMethod::kZoh);
  BatchLqProblem p;
  p.ad = d.ad;
  p.bd = d.bd;
  p.qm = MatrixXd::Zero(4, 4);
  p.qm(0, 0) = 0.4;
  p.rm = 280.0;
  p.p_term = p.qm;
  p.n_steps = n_steps;
  p.h = 0.005;
  return p;
}

}  // namespace

TEST(MatrixExponential, ClosedFormCases) {
  // rotation generator: exp([[0,-w],[w,0]] t) is a rotation by w t
  const double wt = 1.3;
  MatrixXd g(2, 2);
  g << 0.0, -wt, wt, 0.0;
  const MatrixXd r = matrix_exponential(g);
  EXPECT_NEAR(r(0, 0), std::cos(wt), 1e-14);
  EXPECT_NEAR(r(0, 1), -std::sin(wt), 1e-14);
  EXPECT_NEAR(r(1, 0), std::sin(wt), 1e-14);
  EXPECT_NEAR(r(1, 1), std::cos(wt), 1e-14);

  // nilpotent: exp([[0,1],[0,0]]) = [[1,1],[0,1]] exactly
  MatrixXd nil(2, 2);
  nil << 0.0, 1.0, 0.0, 0.0;
  const MatrixXd en = matrix_exponential(nil);
  EXPECT_DOUBLE_EQ(en(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(en(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(en(1, 0), 0.0);
  EXPECT_DOUBLE_EQ(en(1, 1), 1.0);

  // diagonal
  const MatrixXd d = Eigen::Vector3d(-2.0, 0.0, 1.5).asDiagonal();
  const MatrixXd ed = matrix_exponential(d);
  EXPECT_NEAR(ed(0, 0), std::exp(-2.0), 1e-14);
  EXPECT_NEAR(ed(1, 1), 1.0, 1e-14);
  EXPECT_NEAR(ed(2, 2), std::exp(1.5), 1e-14);

  EXPECT_TRUE(matrix_exponential(MatrixXd::Zero(3, 3))
                  .isApprox(MatrixXd::Identity(3, 3), 1e-15));
}

TEST(MatrixExponential, AgreesWithPadeReference) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 2 + static_cast<int>(trial % 4);
    // include norms well above the internal scaling threshold
    const MatrixXd m = random_matrix(n, rng, trial < 10 ? 0.5 : 3.0);
    const MatrixXd ours = matrix_exponential(m);
    const MatrixXd ref = m.exp();  // independent Pade implementation
    const double rel = (ours - ref).norm() / ref.norm();
    EXPECT_LT(rel, 1e-12) << "trial " << trial;
  }
}

TEST(Discretize, EulerIsFirstOrderFormula) {
  const LinearDynamics dyn = build_linear_dynamics(VehicleParams{});
  const double h = 0.005;
  const DiscreteLti d = discretize(dyn, h, DiscretizeMethod::kEuler);
  EXPECT_TRUE(d.ad.isApprox(MatrixXd::Identity(4, 4) + h * dyn.A, 1e-15));
  EXPECT_TRUE(d.bd.isApprox(h * dyn.B, 1e-15));
  EXPECT_DOUBLE_EQ(d.h, h);
}

TEST(Discretize, ZohScalarClosedForm) {
  // xdot = -x + 2u, h = 0.1: Ad = e^{-0.1}, Bd = (1 - e^{-0.1}) * 2
  LinearDynamics dyn;
  dyn.A = MatrixXd::Zero(4, 4);
  dyn.B = VectorXd::Zero(4);
  dyn.A(0, 0) = -1.0;
  dyn.B(0) = 2.0;
  const DiscreteLti d = discretize(dyn, 0.1, DiscretizeMethod::kZoh);
  EXPECT_NEAR(d.ad(0, 0), 0.90483741803595957, 1e-15);
  EXPECT_NEAR(d.bd(0), 2.0 * 0.095162581964040427, 1e-15);
}

TEST(Discretize, ZohVehicleMatchesFrozenReference) {
  // reference entries computed with a 30-digit series evaluation of
  // expm(A h) and sum_k A^k h^{k+1}/(k+1)! B
  const LinearDynamics dyn = build_linear_dynamics(VehicleParams{});
  const DiscreteLti d = discretize(dyn, 0.005, DiscretizeMethod::kZoh);

  EXPECT_NEAR(d.ad(0, 1), 0.075, 1e-13);
  EXPECT_NEAR(d.ad(0, 2), 1.938880437992965e-5, 1e-16);
  EXPECT_NEAR(d.ad(0, 3), 0.0049002652098294867, 1e-14);
  EXPECT_NEAR(d.ad(1, 2), 0.0048983330696475189, 1e-14);
  EXPECT_NEAR(d.ad(1, 3), 1.0482637281563871e-5, 1e-16);
  EXPECT_NEAR(d.ad(2, 2), 0.95956351086484743, 1e-13);
  EXPECT_NEAR(d.ad(2, 3), 0.0041361398505706078, 1e-14);
  EXPECT_NEAR(d.ad(3, 2), -0.065326009441623834, 1e-13);
  EXPECT_NEAR(d.ad(3, 3), 0.960221767120009, 1e-13);
  EXPECT_NEAR(d.ad(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(d.ad(1, 0), 0.0, 1e-15);

  EXPECT_NEAR(d.bd(0), 0.00072485332467886007, 1e-15);
  EXPECT_NEAR(d.bd(1), 0.00051216958663406121, 1e-15);
  EXPECT_NEAR(d.bd(2), 0.20367315227439132, 1e-12);
  EXPECT_NEAR(d.bd(3), 0.28060343591629605, 1e-12);
}

TEST(BatchMatrices, StackReproducesForwardSimulation) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 3;
    const int N = 8;
    const BatchLqProblem p = random_problem(rng, n, N);
    const BatchLqMatrices m = build_batch_matrices(p);
    ASSERT_EQ(m.s_bar.rows(), n * N);
    ASSERT_EQ(m.s_bar.cols(), N);
    ASSERT_EQ(m.t_bar.cols(), n);

    const VectorXd x0 = VectorXd::NullaryExpr(n, [&]() { return gauss(rng); });
    const VectorXd u = VectorXd::NullaryExpr(N, [&]() { return gauss(rng); });

    const VectorXd stacked = m.s_bar * u + m.t_bar * x0;
    VectorXd x = x0;
    for (int k = 0; k < N; ++k) {
      x = p.ad * x + p.bd * u(k);
      const double diff = (stacked.segment(k * n, n) - x).cwiseAbs().maxCoeff();
      EXPECT_LT(diff, 1e-12) << "trial " << trial << " step " << k;
    }
  }
}

TEST(BatchMatrices, WeightBlocksPlaceTerminalWeightLast) {
  BatchLqProblem p = vehicle_problem(3);
  p.p_term = MatrixXd::Identity(4, 4) * 9.0;
  const BatchLqMatrices m = build_batch_matrices(p);
  ASSERT_EQ(m.q_bar.rows(), 12);
  EXPECT_DOUBLE_EQ(m.q_bar(0, 0), 0.4);
  EXPECT_DOUBLE_EQ(m.q_bar(4, 4), 0.4);
  EXPECT_DOUBLE_EQ(m.q_bar(8, 8), 9.0);
  EXPECT_DOUBLE_EQ(m.q_bar(9, 9), 9.0);
  EXPECT_DOUBLE_EQ(m.q_bar(1, 1), 0.0);
  EXPECT_TRUE(m.r_bar.isApprox(MatrixXd::Identity(3, 3) * 280.0, 1e-15));
}

TEST(BatchSolve, SingleStepClosedForm) {
  // N = 1, scalar, ad = bd = p = rm = 1, q irrelevant: cost is
  // (x0 + u)^2 p + u^2 rm, minimized at u = -x0 p / (p + rm) = -0.5
  BatchLqProblem p;
  p.ad = MatrixXd::Ones(1, 1);
  p.bd = VectorXd::Ones(1);
  p.qm = MatrixXd::Zero(1, 1);
  p.rm = 1.0;
  p.p_term = MatrixXd::Ones(1, 1);
  p.n_steps = 1;
  p.h = 0.1;
  const VectorXd u = batch_lq_solve(p, VectorXd::Ones(1));
  ASSERT_EQ(u.size(), 1);
  EXPECT_NEAR(u(0), -0.5, 1e-14);

  const auto gains = riccati_solve(p);
  ASSERT_EQ(gains.size(), 1u);
  EXPECT_NEAR(gains[0](0), 0.5, 1e-14);
}

TEST(BatchSolve, MatchesRiccatiOnRandomProblems) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 2 + trial % 3;
    const int N = (trial % 2 == 0) ? 5 : 23;
    const BatchLqProblem p = random_problem(rng, n, N);
    const VectorXd x0 = VectorXd::NullaryExpr(n, [&]() { return gauss(rng); });

    const VectorXd u_batch = batch_lq_solve(p, x0);
    const VectorXd u_riccati = riccati_control_sequence(p, x0);
    ASSERT_EQ(u_batch.size(), N);
    ASSERT_EQ(u_riccati.size(), N);
    const double scale = std::max(u_riccati.cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((u_batch - u_riccati).cwiseAbs().maxCoeff() / scale, 1e-8)
        << "trial " << trial;
  }
}

TEST(BatchSolve, MatchesRiccatiOnTheVehicleProblem) {
  const BatchLqProblem p = vehicle_problem(100);
  const VectorXd x0 = (VectorXd(4) << -1.0, 0.1, 0.0, 0.2).finished();
  const VectorXd u_batch = batch_lq_solve(p, x0);
  const VectorXd u_riccati = riccati_control_sequence(p, x0);
  const double scale = std::max(u_riccati.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT((u_batch - u_riccati).cwiseAbs().maxCoeff() / scale, 1e-8);
}

TEST(BatchSolve, FirstMoveGainMatchesFullSolve) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const BatchLqProblem p = vehicle_problem(40);
  const RowVectorXd gain = first_move_gain(p);
  for (int trial = 0; trial < 5; ++trial) {
    const VectorXd x0 = VectorXd::NullaryExpr(4, [&]() { return gauss(rng); });
    const VectorXd u = batch_lq_solve(p, x0);
    EXPECT_NEAR(-gain.dot(x0), u(0), 1e-10 * std::max(1.0, std::abs(u(0))));
  }
}

TEST(BatchSolve, ValidationRejectsBadProblems) {
  BatchLqProblem p = vehicle_problem(10);
  p.rm = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = vehicle_problem(10);
  p.n_steps = 0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = vehicle_problem(10);
  p.h = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
  p = vehicle_problem(10);
  p.bd = VectorXd::Zero(3);
  EXPECT_THROW(p.validate(), DimensionError);
  EXPECT_NO_THROW(vehicle_problem(10).validate());
}

TEST(PolicyError, OracleAsPolicyScoresZero) {
  const BatchLqProblem base = vehicle_problem(100);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  std::vector<TestPoint> points;
  for (int i = 0; i < 40; ++i) {
    TestPoint tp;
    tp.x = VectorXd::NullaryExpr(4, [&]() { return unif(rng); });
    tp.t = 0.25 * (unif(rng) + 1.0);  // [0, 0.5]
    points.push_back(tp);
  }

  const PolicyErrorEvaluator evaluator(base, points, 1e9);
  // replicate the evaluator's own receding-horizon convention
  const double t_total = base.n_steps * base.h;
  const Controller oracle = [&](const Eigen::Ref<const VectorXd>& x, double t) {
    const long raw = std::lround((t_total - t) / base.h);
    const int steps = static_cast<int>(std::clamp<long>(raw, 1, base.n_steps));
    BatchLqProblem sub = base;
    sub.n_steps = steps;
    return -first_move_gain(sub).dot(x);
  };

  const PolicyErrorStats stats = evaluator.evaluate(oracle);
  EXPECT_LT(stats.mean_abs, 1e-12);
  EXPECT_LT(std::abs(stats.mean_signed), 1e-12);
  EXPECT_GT(stats.u_star_max, stats.u_star_min);
  EXPECT_EQ(stats.bound_violations, 0);
}

TEST(PolicyError, NormalizationAndSign) {
  // two test points with hand-computable oracle moves: N = 1, scalar problem,
  // u* = -0.5 x0 (see SingleStepClosedForm)
  BatchLqProblem p;
  p.ad = MatrixXd::Ones(1, 1);
  p.bd = VectorXd::Ones(1);
  p.qm = MatrixXd::Zero(1, 1);
  p.rm = 1.0;
  p.p_term = MatrixXd::Ones(1, 1);
  p.n_steps = 1;
  p.h = 0.1;

  std::vector<TestPoint> points(2);
  points[0].x = VectorXd::Constant(1, 2.0);   // u* = -1.0
  points[0].t = 0.0;
  points[1].x = VectorXd::Constant(1, -2.0);  // u* = +1.0
  points[1].t = 0.0;

  const PolicyErrorEvaluator evaluator(p, points, 10.0);
  EXPECT_NEAR(evaluator.control_range(), 2.0, 1e-14);

  // policy = oracle + 0.1: mean_abs = mean_signed = 0.1 / range = 0.05
  const Controller off = [](const Eigen::Ref<const VectorXd>& x, double) {
    return -0.5 * x(0) + 0.1;
  };
  const PolicyErrorStats stats = evaluator.evaluate(off);
  EXPECT_NEAR(stats.mean_abs, 0.05, 1e-12);
  EXPECT_NEAR(stats.mean_signed, 0.05, 1e-12);

  const Controller under = [](const Eigen::Ref<const VectorXd>& x, double) {
    return -0.5 * x(0) - 0.1;
  };
  EXPECT_NEAR(evaluator.evaluate(under).mean_signed, -0.05, 1e-12);
  EXPECT_NEAR(evaluator.evaluate(under).mean_abs, 0.05, 1e-12);

  EXPECT_NEAR(policy_error(off, p, points), 0.05, 1e-12);
  EXPECT_NEAR(policy_error(off, p, points, true), 0.05, 1e-12);
}

TEST(PolicyError, NearTerminalTimesUseAtLeastOneStep) {
  const BatchLqProblem base = vehicle_problem(100);
  std::vector<TestPoint> points(2);
  points[0].x = (VectorXd(4) << 1.0, 0.0, 0.0, 0.0).finished();
  points[0].t = 0.5;  // zero time left still scores against a 1-step oracle
  points[1].x = (VectorXd(4) << -1.0, 0.0, 0.0, 0.0).finished();
  points[1].t = 0.49999;

  EXPECT_NO_THROW({
    const PolicyErrorEvaluator evaluator(base, points, 1e9);
    EXPECT_GT(evaluator.control_range(), 0.0);
  });
}

TEST(PolicyError, DegenerateTestSetThrows) {
  const BatchLqProblem base = vehicle_problem(10);
  std::vector<TestPoint> points(3);
  for (auto& tp : points) {
    tp.x = VectorXd::Zero(4);  // oracle move is zero everywhere
    tp.t = 0.0;
  }
  EXPECT_THROW(PolicyErrorEvaluator(base, points, 1e9),
               DegenerateNormalizationError);
}

TEST(PolicyError, CountsBoundViolations) {
  const BatchLqProblem base = vehicle_problem(100);
  std::vector<TestPoint> points(2);
  points[0].x = (VectorXd(4) << 30.0, 0.0, 0.0, 0.0).finished();
  points[0].t = 0.0;
  points[1].x = (VectorXd(4) << -30.0, 0.0, 0.0, 0.0).finished();
  points[1].t = 0.0;
  const PolicyErrorEvaluator tight(base, points, 1e-4);
  EXPECT_EQ(tight.bound_violations(), 2);
  const PolicyErrorEvaluator loose(base, points, 1e9);
  EXPECT_EQ(loose.bound_violations(), 0);
}
