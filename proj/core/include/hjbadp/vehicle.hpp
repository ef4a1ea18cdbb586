#pragma once

#include <Eigen/Core>

#include "hjbadp/errors.hpp"

namespace hjbadp {

// Front/rear cornering stiffnesses are negative by sign convention.
struct VehicleParams {
  double k1 = -88000.0;   // front cornering stiffness [N/rad]
  double k2 = -94000.0;   // rear cornering stiffness [N/rad]
  double a = 1.14;        // CG to front axle [m]
  double b = 1.40;        // CG to rear axle [m]
  double m = 1500.0;      // mass [kg]
  double izz = 2420.0;    // yaw inertia [kg m^2]
  double vx = 15.0;       // longitudinal speed [m/s]
  double delta_max = 0.35;  // steering bound [rad]

  void validate() const;  // throws SingularModelError / ConfigError
};

// Lateral tracking error state for the linear model.
struct TrackingState {
  double d = 0.0;    // lateral offset from the reference [m]
  double phi = 0.0;  // heading error [rad]
  double r = 0.0;    // yaw rate [rad/s]
  double vy = 0.0;   // body lateral velocity [m/s]

  Eigen::Vector4d vec() const { return Eigen::Vector4d(d, phi, r, vy); }
  static TrackingState from_vec(const Eigen::Vector4d& x) { return {x(0), x(1), x(2), x(3)}; }
};

struct Control {
  double delta = 0.0;  // front steering angle [rad]
};

// Constant-speed lateral dynamics x' = A x + B u over (d, phi, r, vy).
struct LinearDynamics {
  Eigen::Matrix4d A;
  Eigen::Vector4d B;
};

LinearDynamics build_linear_dynamics(const VehicleParams& vp);

Eigen::Vector4d linear_derivative(const LinearDynamics& dyn, const Eigen::Vector4d& x,
                                  double delta);

// Planar pose of the kinematic bicycle (rear-to-front geometry, CG reference).
struct Pose {
  double x_pos = 0.0;
  double y_pos = 0.0;
  double heading = 0.0;
};

// Sideslip angle of the CG velocity for a given steering angle.
double kinematic_sideslip(const VehicleParams& vp, double delta);

// Returns (x_pos', y_pos', heading').
Eigen::Vector3d kinematic_bicycle_derivative(const VehicleParams& vp, const Pose& pose,
                                             double delta);

// Projects an absolute pose onto a local reference point: lateral offset
// measured along the reference normal and heading error.
struct ErrorState {
  double d = 0.0;
  double phi = 0.0;
};

ErrorState error_state(double y_actual, double heading_actual, double y_ref, double theta_ref);

}  // namespace hjbadp
