#include "hjbadp/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "hjbadp/trainer.hpp"

namespace hjbadp {

namespace {

// Cubic smoothstep and its derivative on [0, 1].
inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }
inline double smoothstep_d(double t) { return 6.0 * t * (1.0 - t); }

// Double lane change gate geometry [m].
constexpr double kDlcEntry = 15.0;
constexpr double kDlcRampUp = 30.0;
constexpr double kDlcHoldEnd = 70.0;
constexpr double kDlcRampDown = 25.0;
constexpr double kDlcOffset = 3.5;

double dlc_y(double x) {
  if (x < kDlcEntry) return 0.0;
  if (x < kDlcEntry + kDlcRampUp) return kDlcOffset * smoothstep((x - kDlcEntry) / kDlcRampUp);
  if (x < kDlcHoldEnd) return kDlcOffset;
  if (x < kDlcHoldEnd + kDlcRampDown) {
    return kDlcOffset * (1.0 - smoothstep((x - kDlcHoldEnd) / kDlcRampDown));
  }
  return 0.0;
}

double dlc_slope(double x) {
  if (x < kDlcEntry) return 0.0;
  if (x < kDlcEntry + kDlcRampUp) {
    return kDlcOffset * smoothstep_d((x - kDlcEntry) / kDlcRampUp) / kDlcRampUp;
  }
  if (x < kDlcHoldEnd) return 0.0;
  if (x < kDlcHoldEnd + kDlcRampDown) {
    return -kDlcOffset * smoothstep_d((x - kDlcHoldEnd) / kDlcRampDown) / kDlcRampDown;
  }
  return 0.0;
}

}  // namespace

ReferencePath make_reference(const ReferenceSpec& spec) {
  ReferencePath path;
  switch (spec.kind) {
    case ReferenceKind::kStraight:
      path.y = [](double) { return 0.0; };
      path.heading = [](double) { return 0.0; };
      return path;
    case ReferenceKind::kSine: {
      if (!(spec.wavelength > 0.0)) throw ConfigError("reference.wavelength must be positive");
      const double a = spec.amplitude;
      const double w = 2.0 * M_PI / spec.wavelength;
      path.y = [a, w](double x) { return a * std::sin(w * x); };
      path.heading = [a, w](double x) { return std::atan(a * w * std::cos(w * x)); };
      return path;
    }
    case ReferenceKind::kDoubleLaneChange:
      path.y = dlc_y;
      path.heading = [](double x) { return std::atan(dlc_slope(x)); };
      return path;
  }
  throw ConfigError("unknown reference kind");
}

SimTrace closed_loop_sim(SimModel model, const SimConfig& config,
                         const ErrorController& controller) {
  config.vehicle.validate();
  if (!(config.dt > 0.0) || !(config.duration >= config.dt)) {
    throw ConfigError("simulation duration/dt invalid");
  }
  const ReferencePath ref = make_reference(config.reference);
  const long steps = std::lround(config.duration / config.dt);
  const double delta_max = config.vehicle.delta_max;

  SimTrace trace;
  trace.dt = config.dt;
  const auto reserve_all = [&](long count) {
    for (auto* v : {&trace.times, &trace.controls, &trace.x_pos, &trace.y_actual, &trace.y_desired,
                    &trace.heading_actual, &trace.heading_desired, &trace.yaw_rate,
                    &trace.lateral_velocity, &trace.d_err, &trace.phi_err}) {
      v->reserve(static_cast<size_t>(count));
    }
  };
  reserve_all(steps);

  const bool linear = (model == SimModel::kLinear);
  const int nx = linear ? 5 : 3;
  trace.states.resize(nx, steps);

  // Linear model state: [x_pos, y, heading, r, vy]; kinematic: [x_pos, y, heading].
  Eigen::VectorXd s = Eigen::VectorXd::Zero(nx);
  s(1) = ref.y(0.0) + config.initial_y_offset;
  s(2) = config.initial_heading;

  LinearDynamics dyn;
  if (linear) dyn = build_linear_dynamics(config.vehicle);
  const double vx = config.vehicle.vx;

  Plant plant;
  plant.state_dim = nx;
  if (linear) {
    // Exact planar kinematics on top of the body-frame (r, vy) rows, which
    // the error-state matrix already contains.
    plant.derivative = [dyn, vx](const Eigen::Ref<const Eigen::VectorXd>& x,
                                  double u) -> Eigen::VectorXd {
      Eigen::VectorXd dot(5);
      const double heading = x(2), r = x(3), vy = x(4);
      dot(0) = vx * std::cos(heading) - vy * std::sin(heading);
      dot(1) = vx * std::sin(heading) + vy * std::cos(heading);
      dot(2) = r;
      dot(3) = dyn.A(2, 2) * r + dyn.A(2, 3) * vy + dyn.B(2) * u;
      dot(4) = dyn.A(3, 2) * r + dyn.A(3, 3) * vy + dyn.B(3) * u;
      return dot;
    };
  } else {
    const VehicleParams vp = config.vehicle;
    plant.derivative = [vp](const Eigen::Ref<const Eigen::VectorXd>& x,
                            double u) -> Eigen::VectorXd {
      Pose pose{x(0), x(1), x(2)};
      return kinematic_bicycle_derivative(vp, pose, u);
    };
  }

  Eigen::VectorXd err(linear ? 4 : 2);
  for (long k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * config.dt;
    const double y_ref = ref.y(s(0));
    const double th_ref = ref.heading(s(0));
    const ErrorState e = error_state(s(1), s(2), y_ref, th_ref);
    err(0) = e.d;
    err(1) = e.phi;
    double yaw_rate, vy_body;
    if (linear) {
      err(2) = s(3);
      err(3) = s(4);
      yaw_rate = s(3);
      vy_body = s(4);
    } else {
      yaw_rate = 0.0;  // filled after the control is known
      vy_body = 0.0;
    }
    double u = controller(err);
    u = std::clamp(u, -delta_max, delta_max);
    if (!linear) {
      const double beta = kinematic_sideslip(config.vehicle, u);
      yaw_rate = vx / config.vehicle.b * std::sin(beta);
      vy_body = vx * std::sin(beta);
    }

    trace.times.push_back(t);
    trace.controls.push_back(u);
    trace.x_pos.push_back(s(0));
    trace.y_actual.push_back(s(1));
    trace.y_desired.push_back(y_ref);
    trace.heading_actual.push_back(s(2));
    trace.heading_desired.push_back(th_ref);
    trace.yaw_rate.push_back(yaw_rate);
    trace.lateral_velocity.push_back(vy_body);
    trace.d_err.push_back(e.d);
    trace.phi_err.push_back(e.phi);
    trace.states.col(k) = s;

    const Controller hold = [u](const Eigen::Ref<const Eigen::VectorXd>&, double) { return u; };
    s = rk4_step(plant, s, hold, t, config.dt);
    if (!s.allFinite()) {
      trace.valid = false;
      trace.states.conservativeResize(Eigen::NoChange, k + 1);
      return trace;
    }
  }
  return trace;
}

namespace {

double rms(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double e = a[i] - b[i];
    acc += e * e;
  }
  return std::sqrt(acc / static_cast<double>(a.size()));
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::fmax(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace

TrackingMetrics tracking_metrics(const SimTrace& trace) {
  if (trace.times.empty()) throw ContractError("tracking_metrics: empty trace");
  if (!trace.valid) throw ContractError("tracking_metrics: trace flagged invalid");
  TrackingMetrics m;
  m.i_yerr = rms(trace.y_actual, trace.y_desired);
  m.i_ymax = max_abs_diff(trace.y_actual, trace.y_desired);
  m.i_theta_err = rms(trace.heading_actual, trace.heading_desired);
  m.i_theta_max = max_abs_diff(trace.heading_actual, trace.heading_desired);
  const std::vector<double> zeros(trace.yaw_rate.size(), 0.0);
  m.i_ycomf = rms(trace.yaw_rate, zeros);
  return m;
}

TimingEntry time_callable(const std::string& label, int horizon, int reps, int warmup,
                          const std::function<void()>& fn) {
  if (reps < 1) throw ConfigError("timing: reps must be at least 1");
  for (int i = 0; i < warmup; ++i) fn();
  std::vector<double> ms(static_cast<size_t>(reps));
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    ms[static_cast<size_t>(i)] = std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  std::vector<double> sorted = ms;
  std::sort(sorted.begin(), sorted.end());
  const auto pct = [&sorted](double p) {
    const size_t idx = static_cast<size_t>(
        std::min<long>(static_cast<long>(sorted.size()) - 1,
                       std::lround(std::ceil(p * static_cast<double>(sorted.size())) - 1)));
    return sorted[idx];
  };
  TimingEntry e;
  e.label = label;
  e.horizon = horizon;
  e.samples = reps;
  e.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(reps);
  e.median_ms = pct(0.5);
  e.min_ms = sorted.front();
  e.max_ms = sorted.back();
  e.p99_ms = pct(0.99);
  return e;
}

TimingEntry bench_policy_inference(const MlpParams& actor, const Eigen::MatrixXd& states,
                                   const Eigen::RowVectorXd& times, int reps, int warmup) {
  if (states.cols() < 1 || states.cols() != times.size()) {
    throw DimensionError("bench_policy_inference: states/times mismatch");
  }
  const Eigen::Index count = states.cols();
  Eigen::Index idx = 0;
  volatile double sink = 0.0;
  auto fn = [&]() {
    sink = policy_eval(actor, states.col(idx), times(idx));
    idx = (idx + 1) % count;
  };
  (void)sink;
  return time_callable("policy_inference", -1, reps, warmup, fn);
}

TimingReport bench_lq_horizon_sweep(const BatchLqProblem& base, const std::vector<int>& horizons,
                                    const Eigen::MatrixXd& states, int reps, int warmup) {
  if (states.cols() < 1 || states.rows() != base.ad.rows()) {
    throw DimensionError("bench_lq_horizon_sweep: states must be (n x count)");
  }
  TimingReport report;
  for (int n_steps : horizons) {
    BatchLqProblem p = base;
    p.n_steps = n_steps;
    p.validate();
    const Eigen::Index count = states.cols();
    Eigen::Index idx = 0;
    volatile double sink = 0.0;
    auto fn = [&]() {
      const Eigen::VectorXd u = batch_lq_solve(p, states.col(idx));
      sink = u(0);
      idx = (idx + 1) % count;
    };
    (void)sink;
    report.entries.push_back(
        time_callable("lq_batch_solve", n_steps, reps, warmup, fn));
  }
  return report;
}

void write_trace_csv(const std::filesystem::path& path, const SimTrace& trace) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open trace file for writing: " + path.string());
  out.precision(17);
  out << "time,x_pos,y_actual,y_desired,heading_actual,heading_desired,yaw_rate,"
         "lateral_velocity,control,d,phi\n";
  for (size_t i = 0; i < trace.times.size(); ++i) {
    out << trace.times[i] << ',' << trace.x_pos[i] << ',' << trace.y_actual[i] << ','
        << trace.y_desired[i] << ',' << trace.heading_actual[i] << ',' << trace.heading_desired[i]
        << ',' << trace.yaw_rate[i] << ',' << trace.lateral_velocity[i] << ','
        << trace.controls[i] << ',' << trace.d_err[i] << ',' << trace.phi_err[i] << '\n';
  }
}

void write_metrics_text(const std::filesystem::path& path, const TrackingMetrics& m) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open metrics file for writing: " + path.string());
  out.precision(17);
  out << "i_yerr=" << m.i_yerr << "\n"
      << "i_ymax=" << m.i_ymax << "\n"
      << "i_theta_err=" << m.i_theta_err << "\n"
      << "i_theta_max=" << m.i_theta_max << "\n"
      << "i_ycomf=" << m.i_ycomf << "\n";
}

void write_timing_csv(const std::filesystem::path& path, const TimingReport& report) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open timing file for writing: " + path.string());
  out.precision(17);
  out << "label,horizon,samples,mean_ms,median_ms,min_ms,max_ms,p99_ms\n";
  for (const TimingEntry& e : report.entries) {
    out << e.label << ',';
    if (e.horizon < 0) {
      out << '-';
    } else {
      out << e.horizon;
    }
    out << ',' << e.samples << ',' << e.mean_ms << ',' << e.median_ms << ',' << e.min_ms << ','
        << e.max_ms << ',' << e.p99_ms << '\n';
  }
}

}  // namespace hjbadp
