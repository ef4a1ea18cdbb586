#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hjbadp/lq_oracle.hpp"
#include "hjbadp/sim.hpp"
#include "hjbadp/trainer.hpp"
#include "hjbadp/vehicle.hpp"

namespace hjbadp {

// One experiment definition: problem, networks, training, oracle, simulation
// and benchmark settings.  Everything except ocp.q and ocp.r has a default.
struct RunConfig {
  VehicleParams vehicle;

  struct Ocp {
    std::string plant = "linear";  // "linear" | "kinematic"
    double q = 0.0;
    double r = 0.0;
    double horizon_t = 0.5;
    double dt = 0.005;
  } ocp;

  struct Network {
    int hidden_layers = 3;
    int width = 32;
    double actor_output_scale = 0.0;  // 0 means "use vehicle.delta_max"
  } network;

  struct Training {
    int batch_size = 256;
    double lr_critic = 1e-3;
    double lr_actor = 1e-3;
    long max_iterations = 30000;
    long eval_every = 500;
    double terminal_value_weight = 0.0;
    std::vector<std::array<double, 2>> box_bounds;  // per state dimension
  } training;

  struct Oracle {
    std::string method = "zoh";  // "zoh" | "euler"
    double h = 0.005;
    int horizon_steps = 100;
    std::string terminal_weight = "q";  // "q" | "zero"
  } oracle;

  struct Eval {
    int test_states = 500;
  } eval;

  struct Simulation {
    ReferenceSpec reference;
    double duration = 20.0;
    double initial_y_offset = -1.0;
    std::vector<std::string> controllers = {"adp", "lq_mpc"};
  } simulation;

  struct Benchmark {
    std::vector<int> horizons = {10, 30, 60, 100};
    int reps = 1000;
    int warmup = 50;
  } benchmark;

  std::vector<std::uint64_t> seeds = {0};
  std::string output_dir = "out";

  bool linear_plant() const { return ocp.plant == "linear"; }
  int state_dim() const { return linear_plant() ? 4 : 2; }
  double actor_scale() const {
    return network.actor_output_scale > 0.0 ? network.actor_output_scale : vehicle.delta_max;
  }
};

// Parses and validates; error messages name the offending field path
// (for example "ocp.q").  Throws ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

// Defaults filled in; suitable for echoing next to produced artifacts.
nlohmann::ordered_json effective_config_json(const RunConfig& cfg);

// FNV-1a over the effective config without seeds/output_dir, as 8 hex chars;
// identifies the experiment in artifact file names.
std::string config_hash(const RunConfig& cfg);

OcpInstance make_ocp(const RunConfig& cfg);
SamplingBox make_box(const RunConfig& cfg);
TrainConfig make_train_config(const RunConfig& cfg, std::uint64_t seed);
BatchLqProblem make_lq_problem(const RunConfig& cfg);
SimConfig make_sim_config(const RunConfig& cfg);

// The deterministic oracle test set used for training-time evaluation and
// cmd-eval: `count` states and times drawn from the box with seed+3.
std::vector<TestPoint> make_test_points(const RunConfig& cfg, std::uint64_t seed);

}  // namespace hjbadp
