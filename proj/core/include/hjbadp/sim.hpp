#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "hjbadp/lq_oracle.hpp"
#include "hjbadp/ocp.hpp"
#include "hjbadp/vehicle.hpp"

namespace hjbadp {

enum class ReferenceKind { kStraight, kSine, kDoubleLaneChange };

struct ReferenceSpec {
  ReferenceKind kind = ReferenceKind::kSine;
  double amplitude = 1.5;     // sine peak [m]
  double wavelength = 150.0;  // sine period along x [m]
};

// Desired lateral position and heading as functions of longitudinal position.
struct ReferencePath {
  std::function<double(double)> y;
  std::function<double(double)> heading;
};

ReferencePath make_reference(const ReferenceSpec& spec);

enum class SimModel { kLinear, kKinematic };

struct SimConfig {
  VehicleParams vehicle;
  ReferenceSpec reference;
  double duration = 20.0;        // [s]
  double dt = 0.005;             // control/integration period [s]
  double initial_y_offset = 0.0;  // [m]
  double initial_heading = 0.0;   // [rad]
};

struct SimTrace {
  double dt = 0.0;
  bool valid = true;  // false if integration blew up and the trace is partial
  std::vector<double> times;
  std::vector<double> controls;
  std::vector<double> x_pos;
  std::vector<double> y_actual;
  std::vector<double> y_desired;
  std::vector<double> heading_actual;
  std::vector<double> heading_desired;
  std::vector<double> yaw_rate;
  std::vector<double> lateral_velocity;
  std::vector<double> d_err;
  std::vector<double> phi_err;
  Eigen::MatrixXd states;  // raw model states, one column per sample
};

// Steering command from the tracking-error state ([d, phi, r, vy] for the
// linear model, [d, phi] for the kinematic one).  The simulator saturates the
// command to +-delta_max and holds it for one step.
using ErrorController = std::function<double(const Eigen::Ref<const Eigen::VectorXd>&)>;

// Absolute-frame closed loop: at each step the tracking error is formed
// against the reference point at the current longitudinal position (no
// preview), the controller is evaluated and saturated, and the plant is
// integrated one RK4 step with the control held.
SimTrace closed_loop_sim(SimModel model, const SimConfig& config,
                         const ErrorController& controller);

struct TrackingMetrics {
  double i_yerr = 0.0;       // RMS lateral tracking error [m]
  double i_ymax = 0.0;       // max |lateral error| [m]
  double i_theta_err = 0.0;  // RMS heading error [rad]
  double i_theta_max = 0.0;  // max |heading error| [rad]
  double i_ycomf = 0.0;      // RMS yaw rate [rad/s]
};

TrackingMetrics tracking_metrics(const SimTrace& trace);

struct TimingEntry {
  std::string label;
  int horizon = -1;  // -1 renders as "-"
  int samples = 0;
  double mean_ms = 0.0;
  double median_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  double p99_ms = 0.0;
};

struct TimingReport {
  std::vector<TimingEntry> entries;
};

// Wall-clock stats over `reps` calls after `warmup` excluded warmup calls.
TimingEntry time_callable(const std::string& label, int horizon, int reps, int warmup,
                          const std::function<void()>& fn);

TimingEntry bench_policy_inference(const MlpParams& actor, const Eigen::MatrixXd& states,
                                   const Eigen::RowVectorXd& times, int reps, int warmup);

TimingReport bench_lq_horizon_sweep(const BatchLqProblem& base, const std::vector<int>& horizons,
                                    const Eigen::MatrixXd& states, int reps, int warmup);

void write_trace_csv(const std::filesystem::path& path, const SimTrace& trace);
void write_metrics_text(const std::filesystem::path& path, const TrackingMetrics& m);
void write_timing_csv(const std::filesystem::path& path, const TimingReport& report);

}  // namespace hjbadp
