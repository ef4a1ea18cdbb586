#include "hjbadp/config.hpp"

#include <fstream>
#include <optional>
#include <sstream>

namespace hjbadp {

namespace {

// Dotted-path access with field-path error messages.
class JsonReader {
 public:
  explicit JsonReader(const nlohmann::json& root) : root_(root) {}

  const nlohmann::json* find(const std::string& path) const {
    const nlohmann::json* cur = &root_;
    size_t start = 0;
    while (start <= path.size()) {
      const size_t dot = path.find('.', start);
      const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
      if (!cur->is_object() || !cur->contains(key)) return nullptr;
      cur = &(*cur)[key];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    return cur;
  }

  double number(const std::string& path) const {
    const nlohmann::json* j = require(path);
    if (!j->is_number()) throw ConfigError(path + ": expected a number");
    return j->get<double>();
  }
  double number(const std::string& path, double def) const {
    const nlohmann::json* j = find(path);
    if (!j) return def;
    if (!j->is_number()) throw ConfigError(path + ": expected a number");
    return j->get<double>();
  }
  long integer(const std::string& path, long def) const {
    const nlohmann::json* j = find(path);
    if (!j) return def;
    if (!j->is_number_integer()) throw ConfigError(path + ": expected an integer");
    return j->get<long>();
  }
  std::string text(const std::string& path, const std::string& def) const {
    const nlohmann::json* j = find(path);
    if (!j) return def;
    if (!j->is_string()) throw ConfigError(path + ": expected a string");
    return j->get<std::string>();
  }
  std::array<double, 2> pair(const std::string& path, std::array<double, 2> def) const {
    const nlohmann::json* j = find(path);
    if (!j) return def;
    if (!j->is_array() || j->size() != 2 || !(*j)[0].is_number() || !(*j)[1].is_number()) {
      throw ConfigError(path + ": expected [lo, hi]");
    }
    return {(*j)[0].get<double>(), (*j)[1].get<double>()};
  }

  const nlohmann::json* require(const std::string& path) const {
    const nlohmann::json* j = find(path);
    if (!j) throw ConfigError("missing required field: " + path);
    return j;
  }

 private:
  const nlohmann::json& root_;
};

ReferenceKind reference_kind_from_name(const std::string& name) {
  if (name == "straight") return ReferenceKind::kStraight;
  if (name == "sine") return ReferenceKind::kSine;
  if (name == "double_lane_change") return ReferenceKind::kDoubleLaneChange;
  throw ConfigError("simulation.reference.kind: unknown kind '" + name + "'");
}

std::string reference_kind_name(ReferenceKind k) {
  switch (k) {
    case ReferenceKind::kStraight: return "straight";
    case ReferenceKind::kSine: return "sine";
    case ReferenceKind::kDoubleLaneChange: return "double_lane_change";
  }
  return "?";
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  const JsonReader r(j);
  RunConfig c;

  c.vehicle.k1 = r.number("vehicle.k1", c.vehicle.k1);
  c.vehicle.k2 = r.number("vehicle.k2", c.vehicle.k2);
  c.vehicle.a = r.number("vehicle.a", c.vehicle.a);
  c.vehicle.b = r.number("vehicle.b", c.vehicle.b);
  c.vehicle.m = r.number("vehicle.m", c.vehicle.m);
  c.vehicle.izz = r.number("vehicle.izz", c.vehicle.izz);
  c.vehicle.vx = r.number("vehicle.vx", c.vehicle.vx);
  c.vehicle.delta_max = r.number("vehicle.delta_max", c.vehicle.delta_max);
  try {
    c.vehicle.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("vehicle: ") + e.what());
  }

  c.ocp.plant = r.text("ocp.plant", c.ocp.plant);
  if (c.ocp.plant != "linear" && c.ocp.plant != "kinematic") {
    throw ConfigError("ocp.plant: must be 'linear' or 'kinematic'");
  }
  c.ocp.q = r.number("ocp.q");
  c.ocp.r = r.number("ocp.r");
  if (!(c.ocp.q >= 0.0)) throw ConfigError("ocp.q: must be non-negative");
  if (!(c.ocp.r > 0.0)) throw ConfigError("ocp.r: must be positive");
  c.ocp.horizon_t = r.number("ocp.horizon_t", c.ocp.horizon_t);
  c.ocp.dt = r.number("ocp.dt", c.ocp.dt);
  if (!(c.ocp.dt > 0.0)) throw ConfigError("ocp.dt: must be positive");
  if (!(c.ocp.horizon_t >= c.ocp.dt)) throw ConfigError("ocp.horizon_t: must be at least ocp.dt");

  c.network.hidden_layers = static_cast<int>(r.integer("network.hidden_layers", 3));
  c.network.width = static_cast<int>(r.integer("network.width", 32));
  c.network.actor_output_scale = r.number("network.actor_output_scale", 0.0);
  if (c.network.hidden_layers < 1) throw ConfigError("network.hidden_layers: must be at least 1");
  if (c.network.width < 1) throw ConfigError("network.width: must be at least 1");
  if (c.network.actor_output_scale < 0.0) {
    throw ConfigError("network.actor_output_scale: must be positive (or omitted)");
  }

  c.training.batch_size = static_cast<int>(r.integer("training.batch_size", 256));
  c.training.lr_critic = r.number("training.lr_critic", 1e-3);
  c.training.lr_actor = r.number("training.lr_actor", 1e-3);
  c.training.max_iterations = r.integer("training.max_iterations", 30000);
  c.training.eval_every = r.integer("training.eval_every", 500);
  c.training.terminal_value_weight = r.number("training.terminal_value_weight", 0.0);
  if (c.training.batch_size < 1) throw ConfigError("training.batch_size: must be positive");
  if (!(c.training.lr_critic > 0.0)) throw ConfigError("training.lr_critic: must be positive");
  if (!(c.training.lr_actor > 0.0)) throw ConfigError("training.lr_actor: must be positive");
  if (c.training.max_iterations < 1) throw ConfigError("training.max_iterations: must be positive");
  if (c.training.eval_every < 1) throw ConfigError("training.eval_every: must be positive");
  if (c.training.terminal_value_weight < 0.0) {
    throw ConfigError("training.terminal_value_weight: must be non-negative");
  }

  if (c.linear_plant()) {
    c.training.box_bounds = {r.pair("training.box.d", {-3.0, 3.0}),
                             r.pair("training.box.phi", {-0.3, 0.3}),
                             r.pair("training.box.r", {-1.0, 1.0}),
                             r.pair("training.box.vy", {-2.0, 2.0})};
  } else {
    c.training.box_bounds = {r.pair("training.box.d", {-3.0, 3.0}),
                             r.pair("training.box.phi", {-0.3, 0.3})};
  }
  for (size_t i = 0; i < c.training.box_bounds.size(); ++i) {
    if (!(c.training.box_bounds[i][0] < c.training.box_bounds[i][1])) {
      throw ConfigError("training.box: dimension " + std::to_string(i) + " has empty range");
    }
  }

  c.oracle.method = r.text("oracle.method", c.oracle.method);
  if (c.oracle.method != "zoh" && c.oracle.method != "euler") {
    throw ConfigError("oracle.method: must be 'zoh' or 'euler'");
  }
  c.oracle.h = r.number("oracle.h", c.oracle.h);
  if (!(c.oracle.h > 0.0)) throw ConfigError("oracle.h: must be positive");
  c.oracle.horizon_steps = static_cast<int>(r.integer("oracle.horizon_steps", 100));
  if (c.oracle.horizon_steps < 1) throw ConfigError("oracle.horizon_steps: must be at least 1");
  c.oracle.terminal_weight = r.text("oracle.terminal_weight", c.oracle.terminal_weight);
  if (c.oracle.terminal_weight != "q" && c.oracle.terminal_weight != "zero") {
    throw ConfigError("oracle.terminal_weight: must be 'q' or 'zero'");
  }

  c.eval.test_states = static_cast<int>(r.integer("eval.test_states", 500));
  if (c.eval.test_states < 1) throw ConfigError("eval.test_states: must be positive");

  c.simulation.reference.kind =
      reference_kind_from_name(r.text("simulation.reference.kind", "sine"));
  c.simulation.reference.amplitude = r.number("simulation.reference.amplitude", 1.5);
  c.simulation.reference.wavelength = r.number("simulation.reference.wavelength", 150.0);
  if (!(c.simulation.reference.wavelength > 0.0)) {
    throw ConfigError("simulation.reference.wavelength: must be positive");
  }
  c.simulation.duration = r.number("simulation.duration", 20.0);
  if (!(c.simulation.duration > 0.0)) throw ConfigError("simulation.duration: must be positive");
  c.simulation.initial_y_offset = r.number("simulation.initial_y_offset", -1.0);
  if (const nlohmann::json* ctrls = r.find("simulation.controllers")) {
    if (!ctrls->is_array() || ctrls->empty()) {
      throw ConfigError("simulation.controllers: expected a non-empty array");
    }
    c.simulation.controllers.clear();
    for (const auto& e : *ctrls) {
      if (!e.is_string()) throw ConfigError("simulation.controllers: expected strings");
      const std::string name = e.get<std::string>();
      if (name != "adp" && name != "lq_mpc") {
        throw ConfigError("simulation.controllers: unknown controller '" + name + "'");
      }
      c.simulation.controllers.push_back(name);
    }
  }
  if (!c.linear_plant()) {
    for (const std::string& name : c.simulation.controllers) {
      if (name == "lq_mpc") {
        throw ConfigError("simulation.controllers: lq_mpc requires ocp.plant == 'linear'");
      }
    }
  }

  if (const nlohmann::json* hz = r.find("benchmark.horizons")) {
    if (!hz->is_array() || hz->empty()) throw ConfigError("benchmark.horizons: expected a non-empty array");
    c.benchmark.horizons.clear();
    for (const auto& e : *hz) {
      if (!e.is_number_integer() || e.get<int>() < 1) {
        throw ConfigError("benchmark.horizons: expected positive integers");
      }
      c.benchmark.horizons.push_back(e.get<int>());
    }
  }
  c.benchmark.reps = static_cast<int>(r.integer("benchmark.reps", 1000));
  c.benchmark.warmup = static_cast<int>(r.integer("benchmark.warmup", 50));
  if (c.benchmark.reps < 1) throw ConfigError("benchmark.reps: must be positive");
  if (c.benchmark.warmup < 0) throw ConfigError("benchmark.warmup: must be non-negative");

  if (const nlohmann::json* seeds = r.find("seeds")) {
    if (!seeds->is_array() || seeds->empty()) throw ConfigError("seeds: expected a non-empty array");
    c.seeds.clear();
    for (const auto& e : *seeds) {
      if (!e.is_number_integer() || e.get<long long>() < 0) {
        throw ConfigError("seeds: expected non-negative integers");
      }
      c.seeds.push_back(e.get<std::uint64_t>());
    }
  }
  c.output_dir = r.text("output_dir", c.output_dir);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config parse error in " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

nlohmann::ordered_json effective_config_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["vehicle"] = {{"k1", c.vehicle.k1}, {"k2", c.vehicle.k2}, {"a", c.vehicle.a},
                  {"b", c.vehicle.b},   {"m", c.vehicle.m},   {"izz", c.vehicle.izz},
                  {"vx", c.vehicle.vx}, {"delta_max", c.vehicle.delta_max}};
  j["ocp"] = {{"plant", c.ocp.plant},
              {"q", c.ocp.q},
              {"r", c.ocp.r},
              {"horizon_t", c.ocp.horizon_t},
              {"dt", c.ocp.dt}};
  j["network"] = {{"hidden_layers", c.network.hidden_layers},
                  {"width", c.network.width},
                  {"actor_output_scale", c.actor_scale()}};
  nlohmann::ordered_json box;
  const char* names[] = {"d", "phi", "r", "vy"};
  for (size_t i = 0; i < c.training.box_bounds.size(); ++i) {
    box[names[i]] = {c.training.box_bounds[i][0], c.training.box_bounds[i][1]};
  }
  j["training"] = {{"batch_size", c.training.batch_size},
                   {"lr_critic", c.training.lr_critic},
                   {"lr_actor", c.training.lr_actor},
                   {"max_iterations", c.training.max_iterations},
                   {"eval_every", c.training.eval_every},
                   {"terminal_value_weight", c.training.terminal_value_weight},
                   {"box", box}};
  j["oracle"] = {{"method", c.oracle.method},
                 {"h", c.oracle.h},
                 {"horizon_steps", c.oracle.horizon_steps},
                 {"terminal_weight", c.oracle.terminal_weight}};
  j["eval"] = {{"test_states", c.eval.test_states}};
  j["simulation"] = {{"reference",
                      {{"kind", reference_kind_name(c.simulation.reference.kind)},
                       {"amplitude", c.simulation.reference.amplitude},
                       {"wavelength", c.simulation.reference.wavelength}}},
                     {"duration", c.simulation.duration},
                     {"initial_y_offset", c.simulation.initial_y_offset},
                     {"controllers", c.simulation.controllers}};
  j["benchmark"] = {{"horizons", c.benchmark.horizons},
                    {"reps", c.benchmark.reps},
                    {"warmup", c.benchmark.warmup}};
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  return j;
}

std::string config_hash(const RunConfig& cfg) {
  nlohmann::ordered_json j = effective_config_json(cfg);
  j.erase("seeds");
  j.erase("output_dir");
  const std::string dump = j.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : dump) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << std::nouppercase;
  out.width(8);
  out.fill('0');
  out << static_cast<std::uint32_t>(h ^ (h >> 32));
  return out.str();
}

OcpInstance make_ocp(const RunConfig& cfg) {
  OcpInstance ocp;
  if (cfg.linear_plant()) {
    ocp.plant = make_linear_plant(build_linear_dynamics(cfg.vehicle));
  } else {
    ocp.plant = make_kinematic_error_plant(cfg.vehicle);
  }
  ocp.weights.q = cfg.ocp.q;
  ocp.weights.r = cfg.ocp.r;
  ocp.horizon.t_final = cfg.ocp.horizon_t;
  ocp.horizon.dt = cfg.ocp.dt;
  ocp.control_bound = cfg.vehicle.delta_max;
  return ocp;
}

SamplingBox make_box(const RunConfig& cfg) {
  SamplingBox box;
  box.state_bounds = cfg.training.box_bounds;
  box.t_min = 0.0;
  box.t_max = cfg.ocp.horizon_t;
  return box;
}

TrainConfig make_train_config(const RunConfig& cfg, std::uint64_t seed) {
  TrainConfig tc;
  tc.ocp = make_ocp(cfg);
  tc.box = make_box(cfg);
  tc.critic_arch = default_critic_arch(cfg.state_dim(), cfg.network.hidden_layers, cfg.network.width);
  tc.actor_arch = default_actor_arch(cfg.state_dim(), cfg.network.hidden_layers, cfg.network.width,
                                     cfg.actor_scale());
  tc.batch_size = cfg.training.batch_size;
  tc.lr_critic = cfg.training.lr_critic;
  tc.lr_actor = cfg.training.lr_actor;
  tc.max_iterations = cfg.training.max_iterations;
  tc.eval_every = cfg.training.eval_every;
  tc.seed = seed;
  tc.terminal_value_weight = cfg.training.terminal_value_weight;
  return tc;
}

BatchLqProblem make_lq_problem(const RunConfig& cfg) {
  if (!cfg.linear_plant()) {
    throw ConfigError("the LQ oracle requires ocp.plant == 'linear'");
  }
  const LinearDynamics dyn = build_linear_dynamics(cfg.vehicle);
  const DiscreteLti lti = discretize(
      dyn, cfg.oracle.h,
      cfg.oracle.method == "zoh" ? DiscretizeMethod::kZoh : DiscretizeMethod::kEuler);
  BatchLqProblem p;
  p.ad = lti.ad;
  p.bd = lti.bd;
  p.qm = Eigen::Matrix4d::Zero();
  p.qm(0, 0) = cfg.ocp.q;
  p.rm = cfg.ocp.r;
  p.p_term = (cfg.oracle.terminal_weight == "q") ? p.qm : Eigen::MatrixXd(Eigen::Matrix4d::Zero());
  p.n_steps = cfg.oracle.horizon_steps;
  p.h = cfg.oracle.h;
  return p;
}

SimConfig make_sim_config(const RunConfig& cfg) {
  SimConfig sc;
  sc.vehicle = cfg.vehicle;
  sc.reference = cfg.simulation.reference;
  sc.duration = cfg.simulation.duration;
  sc.dt = cfg.ocp.dt;
  sc.initial_y_offset = cfg.simulation.initial_y_offset;
  sc.initial_heading = 0.0;
  return sc;
}

std::vector<TestPoint> make_test_points(const RunConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed + 3);
  const Batch b = sample_batch(make_box(cfg), cfg.eval.test_states, rng);
  std::vector<TestPoint> pts;
  pts.reserve(static_cast<size_t>(b.states.cols()));
  for (Eigen::Index j = 0; j < b.states.cols(); ++j) {
    pts.push_back({b.states.col(j), b.times(j)});
  }
  return pts;
}

}  // namespace hjbadp
