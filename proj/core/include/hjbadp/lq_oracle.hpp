#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "hjbadp/ocp.hpp"
#include "hjbadp/vehicle.hpp"

namespace hjbadp {

// Scaling-and-squaring matrix exponential with a truncated Taylor series on
// the scaled matrix (far more terms than the 12 needed at norm <= 1/2).
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& m);

enum class DiscretizeMethod { kEuler, kZoh };

struct DiscreteLti {
  Eigen::MatrixXd ad;
  Eigen::VectorXd bd;
  double h = 0.0;
};

// kEuler: Ad = I + hA, Bd = hB.  kZoh: exact hold discretization via the
// exponential of the augmented matrix [[A, B], [0, 0]] * h.
DiscreteLti discretize(const LinearDynamics& dyn, double h, DiscretizeMethod method);

struct BatchLqProblem {
  Eigen::MatrixXd ad;      // n x n
  Eigen::VectorXd bd;      // n x 1
  Eigen::MatrixXd qm;      // stage state weight, n x n
  double rm = 0.0;         // control weight
  Eigen::MatrixXd p_term;  // terminal state weight, n x n
  int n_steps = 0;         // horizon length N
  double h = 0.0;          // step length [s]

  void validate() const;
};

struct BatchLqMatrices {
  Eigen::MatrixXd s_bar;  // nN x N, block (i, j) = Ad^(i-j) Bd for j <= i
  Eigen::MatrixXd t_bar;  // nN x n, block i = Ad^(i+1)
  Eigen::MatrixXd q_bar;  // nN x nN, blockdiag(Qm x (N-1), P)
  Eigen::MatrixXd r_bar;  // N x N, rm * I
};

BatchLqMatrices build_batch_matrices(const BatchLqProblem& p);

// Minimizer of the stacked quadratic cost: U* = -H^{-1} F x0 with
// H = 2(R_bar + S_bar' Q_bar S_bar), F = 2 S_bar' Q_bar T_bar, solved by
// Cholesky (H is symmetric positive definite for rm > 0).
Eigen::VectorXd batch_lq_solve(const BatchLqProblem& p, const Eigen::Ref<const Eigen::VectorXd>& x0);

// Row such that the optimal first move is u0* = -gain . x0; identical to the
// first entry of batch_lq_solve by construction.
Eigen::RowVectorXd first_move_gain(const BatchLqProblem& p);

// Backward Riccati recursion for the same cost; returns feedback gains
// K_0..K_{N-1} with u_k = -K_k x_k.
std::vector<Eigen::RowVectorXd> riccati_solve(const BatchLqProblem& p);

// Full control sequence obtained by rolling the Riccati feedback forward.
Eigen::VectorXd riccati_control_sequence(const BatchLqProblem& p,
                                         const Eigen::Ref<const Eigen::VectorXd>& x0);

struct TestPoint {
  Eigen::VectorXd x;
  double t = 0.0;
};

struct PolicyErrorStats {
  double mean_abs = 0.0;     // mean |pi - pi*| / (max pi* - min pi*)
  double mean_signed = 0.0;  // mean (pi - pi*) / (max pi* - min pi*)
  double u_star_min = 0.0;
  double u_star_max = 0.0;
  int bound_violations = 0;  // oracle moves outside the control bound
};

// Precomputes the oracle's first move for a fixed test set; the per-state
// horizon is the remaining time rounded to steps (never fewer than one).
class PolicyErrorEvaluator {
 public:
  PolicyErrorEvaluator(const BatchLqProblem& base, std::vector<TestPoint> points,
                       double control_bound);

  PolicyErrorStats evaluate(const Controller& policy) const;

  const std::vector<TestPoint>& points() const { return points_; }
  const std::vector<double>& oracle_moves() const { return u_star_; }
  double control_range() const { return range_; }
  int bound_violations() const { return bound_violations_; }

 private:
  std::vector<TestPoint> points_;
  std::vector<double> u_star_;
  double range_ = 0.0;
  int bound_violations_ = 0;
};

// Normalized mean policy error against the receding-horizon oracle.
double policy_error(const Controller& policy, const BatchLqProblem& p,
                    const std::vector<TestPoint>& test_points, bool signed_variant = false);

}  // namespace hjbadp
