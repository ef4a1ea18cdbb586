#include "hjbadp/vehicle.hpp"

#include <cmath>

namespace hjbadp {

void VehicleParams::validate() const {
  if (!(vx > 0.0)) {
    throw SingularModelError("vehicle.vx must be positive; the lateral model divides by vx");
  }
  if (!(m > 0.0) || !(izz > 0.0)) {
    throw ConfigError("vehicle.m and vehicle.izz must be positive");
  }
  if (!(a > 0.0) || !(b > 0.0)) {
    throw ConfigError("vehicle.a and vehicle.b must be positive");
  }
  if (!(k1 < 0.0) || !(k2 < 0.0)) {
    throw ConfigError("vehicle.k1 and vehicle.k2 must be negative (cornering stiffness sign convention)");
  }
  if (!(delta_max > 0.0)) {
    throw ConfigError("vehicle.delta_max must be positive");
  }
}

LinearDynamics build_linear_dynamics(const VehicleParams& vp) {
  vp.validate();
  const double a = vp.a, b = vp.b, k1 = vp.k1, k2 = vp.k2;
  LinearDynamics dyn;
  dyn.A.setZero();
  dyn.A(0, 1) = vp.vx;
  dyn.A(0, 3) = 1.0;
  dyn.A(1, 2) = 1.0;
  dyn.A(2, 2) = (a * a * k1 + b * b * k2) / (vp.izz * vp.vx);
  dyn.A(2, 3) = (a * k1 - b * k2) / (vp.izz * vp.vx);
  dyn.A(3, 2) = (a * k1 - b * k2) / (vp.m * vp.vx) - vp.vx;
  dyn.A(3, 3) = (k1 + k2) / (vp.m * vp.vx);
  dyn.B << 0.0, 0.0, -a * k1 / vp.izz, -k1 / vp.m;
  return dyn;
}

Eigen::Vector4d linear_derivative(const LinearDynamics& dyn, const Eigen::Vector4d& x,
                                  double delta) {
  return dyn.A * x + dyn.B * delta;
}

double kinematic_sideslip(const VehicleParams& vp, double delta) {
  return std::atan(vp.b * std::tan(delta) / (vp.a + vp.b));
}

Eigen::Vector3d kinematic_bicycle_derivative(const VehicleParams& vp, const Pose& pose,
                                             double delta) {
  const double beta = kinematic_sideslip(vp, delta);
  Eigen::Vector3d out;
  out(0) = vp.vx * std::cos(pose.heading + beta);
  out(1) = vp.vx * std::sin(pose.heading + beta);
  out(2) = vp.vx / vp.b * std::sin(beta);
  return out;
}

ErrorState error_state(double y_actual, double heading_actual, double y_ref, double theta_ref) {
  ErrorState e;
  e.d = (y_actual - y_ref) * std::cos(theta_ref);
  e.phi = heading_actual - theta_ref;
  return e;
}

}  // namespace hjbadp
