// Microbenchmarks for the hot paths: compiled-policy inference, the two
// training steps, the batched rollout and the receding-horizon LQ solve.
// Complements the CLI `bench` command, which reports end-to-end timing on a
// trained checkpoint.

#include <benchmark/benchmark.h>

#include <random>

#include "hjbadp/config.hpp"
#include "hjbadp/lq_oracle.hpp"
#include "hjbadp/mlp.hpp"
#include "hjbadp/ocp.hpp"
#include "hjbadp/trainer.hpp"

using namespace hjbadp;

namespace {

RunConfig reference_config() {
  return run_config_from_json(nlohmann::json{{"ocp", {{"q", 0.4}, {"r", 280.0}}}});
}

struct Fixture {
  RunConfig cfg = reference_config();
  OcpInstance ocp = make_ocp(cfg);
  MlpParams critic = mlp_init(default_critic_arch(4, 3, 32), 0);
  MlpParams actor = mlp_init(default_actor_arch(4, 3, 32, 0.35), 1);
  Batch batch;
  Eigen::VectorXd x0;

  Fixture() {
    std::mt19937_64 rng(2);
    batch = sample_batch(make_box(cfg), 256, rng);
    x0 = batch.states.col(0);
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

void BM_PolicyEval(benchmark::State& state) {
  Fixture& f = fixture();
  double t = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(policy_eval(f.actor, f.x0, t));
    t = t < 0.4 ? t + 0.005 : 0.0;
  }
}
BENCHMARK(BM_PolicyEval);

void BM_PolicyForwardBatch(benchmark::State& state) {
  Fixture& f = fixture();
  Eigen::MatrixXd input(5, f.batch.states.cols());
  input.topRows(4) = f.batch.states;
  input.row(4) = f.batch.times;
  ForwardCache cache;
  for (auto _ : state) {
    benchmark::DoNotOptimize(mlp_forward_batch(f.actor, input, cache));
  }
  state.SetItemsProcessed(state.iterations() * f.batch.states.cols());
}
BENCHMARK(BM_PolicyForwardBatch);

void BM_CriticStep(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(critic_step(f.batch, f.actor, f.critic, f.ocp, 0.0));
  }
}
BENCHMARK(BM_CriticStep)->Unit(benchmark::kMillisecond);

void BM_ActorStep(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(actor_step(f.batch, f.actor, f.critic, f.ocp));
  }
}
BENCHMARK(BM_ActorStep)->Unit(benchmark::kMillisecond);

void BM_RolloutTerminalBatch(benchmark::State& state) {
  Fixture& f = fixture();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        rollout_terminal_batch(f.actor, f.ocp, f.batch.states, f.batch.times));
  }
}
BENCHMARK(BM_RolloutTerminalBatch)->Unit(benchmark::kMillisecond);

void BM_BatchLqSolve(benchmark::State& state) {
  Fixture& f = fixture();
  BatchLqProblem p = make_lq_problem(f.cfg);
  p.n_steps = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(batch_lq_solve(p, f.x0));
  }
}
BENCHMARK(BM_BatchLqSolve)->Arg(10)->Arg(30)->Arg(60)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_RiccatiSolve(benchmark::State& state) {
  Fixture& f = fixture();
  BatchLqProblem p = make_lq_problem(f.cfg);
  p.n_steps = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(riccati_solve(p));
  }
}
BENCHMARK(BM_RiccatiSolve)->Arg(100);

void BM_ZohDiscretize(benchmark::State& state) {
  Fixture& f = fixture();
  const LinearDynamics dyn = build_linear_dynamics(f.cfg.vehicle);
  for (auto _ : state) {
    benchmark::DoNotOptimize(discretize(dyn, 0.005, DiscretizeMethod::kZoh));
  }
}
BENCHMARK(BM_ZohDiscretize);

}  // namespace

BENCHMARK_MAIN();
