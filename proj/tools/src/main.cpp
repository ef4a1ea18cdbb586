#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "hjbadp/checkpoint.hpp"
#include "hjbadp/config.hpp"

namespace fs = std::filesystem;
using namespace hjbadp;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string checkpoint_path;
  std::string out_override;
  std::optional<std::uint64_t> seed_override;
};

RunConfig load_config(const CommonArgs& args) {
  RunConfig cfg = load_run_config(args.config_path);
  if (!args.out_override.empty()) cfg.output_dir = args.out_override;
  if (args.seed_override) cfg.seeds = {*args.seed_override};
  return cfg;
}

fs::path prepare_output_dir(const RunConfig& cfg) {
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  const std::string hash = config_hash(cfg);
  std::ofstream out(dir / ("config_effective_cfg" + hash + ".json"));
  if (!out) throw ConfigError("cannot write effective config into " + dir.string());
  out << effective_config_json(cfg).dump(1) << '\n';
  return dir;
}

std::string artifact_prefix(const RunConfig& cfg, std::uint64_t seed) {
  return "cfg" + config_hash(cfg) + "_seed" + std::to_string(seed);
}

unsigned worker_count(size_t jobs) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("HJBADP_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) hw = static_cast<unsigned>(v);
  }
  return static_cast<unsigned>(std::min<size_t>(hw, jobs));
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool diverged = false;
  int fail_code = 0;  // non-zero when the seed failed outside of training divergence
  std::string message;
  double final_policy_error = std::numeric_limits<double>::quiet_NaN();
  fs::path checkpoint_path;
};

int cmd_train(const CommonArgs& args) {
  const RunConfig cfg = load_config(args);
  const fs::path dir = prepare_output_dir(cfg);

  std::optional<BatchLqProblem> lq;
  if (cfg.linear_plant()) lq = make_lq_problem(cfg);

  std::vector<SeedOutcome> outcomes(cfg.seeds.size());
  std::mutex io_mutex;

  auto run_seed = [&](size_t idx) {
    const std::uint64_t seed = cfg.seeds[idx];
    SeedOutcome& outcome = outcomes[idx];
    outcome.seed = seed;
    const std::string prefix = artifact_prefix(cfg, seed);
    const fs::path ckpt_path = dir / ("ckpt_" + prefix + ".json");
    outcome.checkpoint_path = ckpt_path;

    TrainConfig tc = make_train_config(cfg, seed);
    TrainHooks hooks;
    std::optional<PolicyErrorEvaluator> evaluator;
    if (lq) {
      evaluator.emplace(*lq, make_test_points(cfg, seed), cfg.vehicle.delta_max);
      hooks.policy_error = [&evaluator](const MlpParams& actor) {
        return evaluator->evaluate(make_policy_controller(actor)).mean_abs;
      };
    }
    hooks.on_eval = [&](const TrainingRecord& rec, const TrainedPolicy& policy) {
      save_checkpoint(ckpt_path, {policy.actor, policy.critic, seed});
      std::lock_guard<std::mutex> lock(io_mutex);
      std::cout << "[seed " << seed << "] iter " << rec.iteration << " j_critic=" << rec.j_critic
                << " j_actor=" << rec.j_actor << " |H-lT|=" << rec.hamiltonian_residual;
      if (std::isfinite(rec.policy_error)) std::cout << " policy_error=" << rec.policy_error;
      std::cout << " elapsed=" << rec.elapsed_s << "s" << std::endl;
    };

    const TrainResult result = train(tc, hooks);
    write_training_log_csv(dir / ("train_log_" + prefix + ".csv"), result.log);
    save_checkpoint(ckpt_path, {result.policy.actor, result.policy.critic, seed});
    if (result.diverged) {
      outcome.diverged = true;
      outcome.message = result.divergence_message;
      return;
    }
    if (!result.log.records.empty()) {
      outcome.final_policy_error = result.log.records.back().policy_error;
    }
  };

  // Worker threads must not leak exceptions (that would terminate the
  // process), so each seed records its failure and the main thread reports.
  auto run_seed_guarded = [&](size_t idx) {
    try {
      run_seed(idx);
    } catch (const NumericError& e) {
      outcomes[idx].fail_code = 3;
      outcomes[idx].message = e.what();
    } catch (const std::exception& e) {
      outcomes[idx].fail_code = 2;
      outcomes[idx].message = e.what();
    }
  };

  const unsigned workers = worker_count(cfg.seeds.size());
  if (workers <= 1) {
    for (size_t i = 0; i < cfg.seeds.size(); ++i) run_seed_guarded(i);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        for (size_t i = next.fetch_add(1); i < cfg.seeds.size(); i = next.fetch_add(1)) {
          run_seed_guarded(i);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  double error_sum = 0.0;
  int error_count = 0;
  for (const SeedOutcome& o : outcomes) {
    if (o.fail_code != 0) {
      std::cerr << "seed " << o.seed << " failed: " << o.message << std::endl;
      return o.fail_code;
    }
    if (o.diverged) {
      std::cerr << "training diverged for seed " << o.seed << ": " << o.message
                << "\nlast checkpoint: " << o.checkpoint_path.string() << std::endl;
      return 3;
    }
    std::cout << "seed " << o.seed << ": checkpoint " << o.checkpoint_path.string();
    if (std::isfinite(o.final_policy_error)) {
      std::cout << ", final policy_error " << o.final_policy_error;
      error_sum += o.final_policy_error;
      ++error_count;
    }
    std::cout << std::endl;
  }
  if (error_count > 0) {
    std::cout << "mean final policy_error over " << error_count
              << " seed(s): " << error_sum / error_count << std::endl;
  }
  return 0;
}

int cmd_eval(const CommonArgs& args) {
  const RunConfig cfg = load_config(args);
  if (!cfg.linear_plant()) {
    throw ConfigError("eval: the LQ oracle requires ocp.plant == 'linear'");
  }
  const fs::path dir = prepare_output_dir(cfg);
  const Checkpoint ckpt = load_checkpoint(args.checkpoint_path);
  if (ckpt.actor.input_width() != cfg.state_dim() + 1) {
    throw ConfigError("eval: checkpoint actor input width does not match ocp.plant");
  }
  const BatchLqProblem lq = make_lq_problem(cfg);
  const PolicyErrorEvaluator evaluator(lq, make_test_points(cfg, ckpt.seed),
                                       cfg.vehicle.delta_max);
  const Controller policy = make_policy_controller(ckpt.actor);
  const PolicyErrorStats stats = evaluator.evaluate(policy);

  const std::string prefix = artifact_prefix(cfg, ckpt.seed);
  std::ofstream csv(dir / ("eval_" + prefix + ".csv"));
  csv.precision(17);
  const bool four_state = cfg.state_dim() == 4;
  csv << (four_state ? "d,phi,r,vy,t,u_star,u_policy\n" : "d,phi,t,u_star,u_policy\n");
  const auto& pts = evaluator.points();
  const auto& u_star = evaluator.oracle_moves();
  for (size_t i = 0; i < pts.size(); ++i) {
    for (Eigen::Index k = 0; k < pts[i].x.size(); ++k) csv << pts[i].x(k) << ',';
    csv << pts[i].t << ',' << u_star[i] << ',' << policy(pts[i].x, pts[i].t) << '\n';
  }

  std::cout << "test_states=" << pts.size() << "\n"
            << "policy_error_mean_abs=" << stats.mean_abs << "\n"
            << "policy_error_mean_signed=" << stats.mean_signed << "\n"
            << "oracle_move_min=" << stats.u_star_min << "\n"
            << "oracle_move_max=" << stats.u_star_max << "\n"
            << "oracle_bound_violations=" << stats.bound_violations << std::endl;
  if (stats.bound_violations > 0) {
    std::cout << "warning: the oracle commands exceed the steering bound on "
              << stats.bound_violations << " test state(s)" << std::endl;
  }
  return 0;
}

int cmd_simulate(const CommonArgs& args) {
  const RunConfig cfg = load_config(args);
  const fs::path dir = prepare_output_dir(cfg);
  const SimConfig sc = make_sim_config(cfg);
  const SimModel model = cfg.linear_plant() ? SimModel::kLinear : SimModel::kKinematic;

  bool needs_ckpt = false;
  for (const std::string& name : cfg.simulation.controllers) needs_ckpt |= (name == "adp");
  std::optional<Checkpoint> ckpt;
  if (needs_ckpt) {
    if (args.checkpoint_path.empty()) {
      throw ConfigError("simulate: --checkpoint is required for the adp controller");
    }
    ckpt = load_checkpoint(args.checkpoint_path);
    if (ckpt->actor.input_width() != cfg.state_dim() + 1) {
      throw ConfigError("simulate: checkpoint actor input width does not match ocp.plant");
    }
  }
  const std::uint64_t seed = ckpt ? ckpt->seed : cfg.seeds.front();
  const std::string prefix = artifact_prefix(cfg, seed);

  nlohmann::ordered_json metrics_json;
  for (const std::string& name : cfg.simulation.controllers) {
    ErrorController controller;
    if (name == "adp") {
      const MlpParams actor = ckpt->actor;
      controller = [actor](const Eigen::Ref<const Eigen::VectorXd>& err) {
        return policy_eval(actor, err, 0.0);
      };
    } else {
      const Eigen::RowVectorXd gain = first_move_gain(make_lq_problem(cfg));
      controller = [gain](const Eigen::Ref<const Eigen::VectorXd>& err) {
        return -gain.dot(err);
      };
    }
    const SimTrace trace = closed_loop_sim(model, sc, controller);
    write_trace_csv(dir / ("trace_" + name + "_" + prefix + ".csv"), trace);
    if (!trace.valid) {
      std::cerr << "simulation with controller '" << name << "' blew up at t="
                << trace.times.back() << "s" << std::endl;
      return 3;
    }
    const TrackingMetrics m = tracking_metrics(trace);
    write_metrics_text(dir / ("metrics_" + name + "_" + prefix + ".txt"), m);
    metrics_json[name] = {{"i_yerr", m.i_yerr},
                          {"i_ymax", m.i_ymax},
                          {"i_theta_err", m.i_theta_err},
                          {"i_theta_max", m.i_theta_max},
                          {"i_ycomf", m.i_ycomf}};
    std::cout << name << ": i_yerr=" << m.i_yerr << " i_ymax=" << m.i_ymax
              << " i_theta_err=" << m.i_theta_err << " i_theta_max=" << m.i_theta_max
              << " i_ycomf=" << m.i_ycomf << std::endl;
  }
  std::ofstream mj(dir / ("metrics_" + prefix + ".json"));
  mj << metrics_json.dump(1) << '\n';
  return 0;
}

int cmd_bench(const CommonArgs& args) {
  const RunConfig cfg = load_config(args);
  const fs::path dir = prepare_output_dir(cfg);
  const Checkpoint ckpt = load_checkpoint(args.checkpoint_path);
  if (ckpt.actor.input_width() != cfg.state_dim() + 1) {
    throw ConfigError("bench: checkpoint actor input width does not match ocp.plant");
  }

  const std::vector<TestPoint> pts = make_test_points(cfg, ckpt.seed);
  Eigen::MatrixXd states(cfg.state_dim(), static_cast<Eigen::Index>(pts.size()));
  Eigen::RowVectorXd times(static_cast<Eigen::Index>(pts.size()));
  for (size_t i = 0; i < pts.size(); ++i) {
    states.col(static_cast<Eigen::Index>(i)) = pts[i].x;
    times(static_cast<Eigen::Index>(i)) = pts[i].t;
  }

  TimingReport report;
  report.entries.push_back(bench_policy_inference(ckpt.actor, states, times, cfg.benchmark.reps,
                                                  cfg.benchmark.warmup));
  if (cfg.linear_plant()) {
    const TimingReport lq_report = bench_lq_horizon_sweep(
        make_lq_problem(cfg), cfg.benchmark.horizons, states, cfg.benchmark.reps,
        cfg.benchmark.warmup);
    report.entries.insert(report.entries.end(), lq_report.entries.begin(),
                          lq_report.entries.end());
  }
  write_timing_csv(dir / ("timing_cfg" + config_hash(cfg) + ".csv"), report);

  std::cout << "label,horizon,samples,mean_ms,median_ms,min_ms,max_ms,p99_ms" << std::endl;
  for (const TimingEntry& e : report.entries) {
    std::cout << e.label << ',' << (e.horizon < 0 ? std::string("-") : std::to_string(e.horizon))
              << ',' << e.samples << ',' << e.mean_ms << ',' << e.median_ms << ',' << e.min_ms
              << ',' << e.max_ms << ',' << e.p99_ms << std::endl;
  }
  if (report.entries.size() > 1) {
    const double policy_mean = report.entries.front().mean_ms;
    const TimingEntry& last = report.entries.back();
    if (policy_mean > 0.0) {
      std::cout << "lq(N=" << last.horizon << ")/policy mean-time ratio: "
                << last.mean_ms / policy_mean << std::endl;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-horizon optimal steering: train, evaluate, simulate, benchmark"};
  app.require_subcommand(1);

  CommonArgs args;
  const auto add_common = [&args](CLI::App* sub, bool needs_ckpt) {
    sub->add_option("--config", args.config_path, "JSON experiment config")->required();
    auto* ck = sub->add_option("--checkpoint", args.checkpoint_path, "checkpoint JSON path");
    if (needs_ckpt) ck->required();
    sub->add_option("--out", args.out_override, "override output directory");
    sub->add_option("--seed-override", args.seed_override,
                    "replace the config seed list with a single seed");
  };

  CLI::App* train_cmd = app.add_subcommand("train", "train actor/critic networks");
  add_common(train_cmd, false);
  CLI::App* eval_cmd = app.add_subcommand("eval", "score a checkpoint against the LQ oracle");
  add_common(eval_cmd, true);
  CLI::App* sim_cmd = app.add_subcommand("simulate", "closed-loop tracking simulation");
  add_common(sim_cmd, false);
  CLI::App* bench_cmd = app.add_subcommand("bench", "inference and LQ solve timing");
  add_common(bench_cmd, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    std::cout.precision(10);
    if (app.got_subcommand(train_cmd)) return cmd_train(args);
    if (app.got_subcommand(eval_cmd)) return cmd_eval(args);
    if (app.got_subcommand(sim_cmd)) return cmd_simulate(args);
    if (app.got_subcommand(bench_cmd)) return cmd_bench(args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const DimensionError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "usage error: " << e.what() << std::endl;
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << std::endl;
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
