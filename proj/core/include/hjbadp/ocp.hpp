#pragma once

#include <functional>

#include <Eigen/Core>

#include "hjbadp/mlp.hpp"
#include "hjbadp/vehicle.hpp"

namespace hjbadp {

struct UtilityWeights {
  double q = 0.4;   // lateral offset weight
  double r = 280.0;  // steering weight
};

struct Horizon {
  double t_final = 0.5;  // [s]
  double dt = 0.005;     // integrator step [s]

  void validate() const;
};

// Continuous-time control-affine-enough plant: f(x, u) with scalar control.
struct Plant {
  int state_dim = 0;
  std::function<Eigen::VectorXd(const Eigen::Ref<const Eigen::VectorXd>&, double)> derivative;
  // df/du as an (state_dim x 1) column.
  std::function<Eigen::VectorXd(const Eigen::Ref<const Eigen::VectorXd>&, double)> control_jacobian;
  // Column-batched forms; out must be preallocated (state_dim x m).
  std::function<void(const ConstMatRef&, const ConstRowRef&, Eigen::Ref<Eigen::MatrixXd>)>
      derivative_batch;
  std::function<void(const ConstMatRef&, const ConstRowRef&, Eigen::Ref<Eigen::MatrixXd>)>
      control_jacobian_batch;
};

Plant make_linear_plant(const LinearDynamics& dyn);

// Two-state (d, phi) tracking-error dynamics of the kinematic bicycle along a
// straight reference; control enters through the sideslip angle, so the
// control Jacobian is a central finite difference (step 1e-6).
Plant make_kinematic_error_plant(const VehicleParams& vp);

struct OcpInstance {
  Plant plant;
  UtilityWeights weights;
  Horizon horizon;
  double control_bound = 0.35;
};

// Running cost q*d^2 + r*u^2 where d is the first state component.
double utility(const Eigen::Ref<const Eigen::VectorXd>& x, double u, const UtilityWeights& w);

// H = l(x,u) + <value_grad_x, f(x,u)>.
double hamiltonian(const Eigen::Ref<const Eigen::VectorXd>& x, double u,
                   const Eigen::Ref<const Eigen::VectorXd>& value_grad_x, const Plant& plant,
                   const UtilityWeights& w);

using Controller = std::function<double(const Eigen::Ref<const Eigen::VectorXd>&, double)>;

// Classic RK4 step; the control is re-evaluated at each stage state and time.
Eigen::VectorXd rk4_step(const Plant& plant, const Eigen::Ref<const Eigen::VectorXd>& x,
                         const Controller& control, double t, double dt);

struct TerminalRollout {
  Eigen::VectorXd x_final;
  double u_final = 0.0;
  double utility_final = 0.0;
};

// Integrates x under the closed-loop policy from (x, t) to the end of the
// horizon with fixed steps of horizon.dt plus one shorter remainder step,
// then evaluates the policy and the running cost at the final point.
// t == t_final degenerates to zero integration steps.
TerminalRollout rollout_terminal(const Controller& policy, const OcpInstance& ocp,
                                 const Eigen::Ref<const Eigen::VectorXd>& x, double t);

struct BatchRollout {
  Eigen::MatrixXd x_final;          // state_dim x m
  Eigen::RowVectorXd u_final;       // 1 x m
  Eigen::RowVectorXd utility_final;  // 1 x m
};

// Column-batched equivalent of rollout_terminal for an MLP policy whose input
// is [x; t].  Columns are advanced in lockstep with per-column step sizes;
// internally samples are sorted by remaining steps so the active set stays a
// prefix, and results are returned in the caller's column order.
BatchRollout rollout_terminal_batch(const MlpParams& policy, const OcpInstance& ocp,
                                    const ConstMatRef& x0,
                                    const Eigen::Ref<const Eigen::RowVectorXd>& t0);

}  // namespace hjbadp
