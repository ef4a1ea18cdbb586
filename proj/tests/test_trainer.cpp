#include <gtest/gtest.h>

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "hjbadp/errors.hpp"
#include "hjbadp/trainer.hpp"
#include "hjbadp/vehicle.hpp"

using namespace hjbadp;
using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

namespace {

void expect_close(double a, double b, double rel, double abs_floor,
                  const std::string& what) {
  const double diff = std::abs(a - b);
  const double scale = std::max(std::abs(a), std::abs(b));
  EXPECT_TRUE(diff <= rel * scale || diff <= abs_floor)
      << what << ": " << a << " vs " << b << " (diff " << diff << ")";
}

OcpInstance vehicle_ocp() {
  OcpInstance ocp;
  ocp.plant = make_linear_plant(build_linear_dynamics(VehicleParams{}));
  ocp.weights = UtilityWeights{0.4, 280.0};
  ocp.horizon = Horizon{0.5, 0.005};
  ocp.control_bound = 0.35;
  return ocp;
}

SamplingBox vehicle_box() {
  SamplingBox box;
  box.state_bounds = {{-3.0, 3.0}, {-0.3, 0.3}, {-1.0, 1.0}, {-2.0, 2.0}};
  box.t_min = 0.0;
  box.t_max = 0.5;
  return box;
}

TrainConfig small_vehicle_config() {
  TrainConfig tc;
  tc.ocp = vehicle_ocp();
  tc.box = vehicle_box();
  tc.critic_arch = default_critic_arch(4, 2, 8);
  tc.actor_arch = default_actor_arch(4, 2, 8, tc.ocp.control_bound);
  tc.batch_size = 16;
  tc.max_iterations = 120;
  tc.eval_every = 40;
  tc.seed = 0;
  return tc;
}

// 1D plant xdot = -x + u for cheap rollouts
Plant decay_plant() {
  Plant p;
  p.state_dim = 1;
  p.derivative = [](const Eigen::Ref<const VectorXd>& x, double u) {
    return VectorXd::Constant(1, -x(0) + u);
  };
  p.control_jacobian = [](const Eigen::Ref<const VectorXd>&, double) {
    return VectorXd::Ones(1);
  };
  p.derivative_batch = [](const ConstMatRef& x, const ConstRowRef& u,
                          Eigen::Ref<MatrixXd> out) {
    out = -x;
    out.row(0) += u;
  };
  p.control_jacobian_batch = [](const ConstMatRef&, const ConstRowRef&,
                                Eigen::Ref<MatrixXd> out) { out.setOnes(); };
  return p;
}

// FD over a sampled subset of parameters against the reported gradient
template <typename LossFn>
void check_param_gradient(MlpParams params, const ParamGradient& grad, LossFn loss,
                          int stride, double rel, const std::string& tag) {
  const double h = 1e-6;
  for (size_t k = 0; k < params.layers.size(); ++k) {
    auto& w = params.layers[k].weights;
    for (int i = 0; i < w.size(); i += stride) {
      const double saved = w(i);
      w(i) = saved + h;
      const double up = loss(params);
      w(i) = saved - h;
      const double dn = loss(params);
      w(i) = saved;
      expect_close(grad.layers[k].weights(i), (up - dn) / (2.0 * h), rel, 1e-8,
                   tag + " dW");
    }
    auto& b = params.layers[k].bias;
    for (int i = 0; i < b.size(); i += 2) {
      const double saved = b(i);
      b(i) = saved + h;
      const double up = loss(params);
      b(i) = saved - h;
      const double dn = loss(params);
      b(i) = saved;
      expect_close(grad.layers[k].bias(i), (up - dn) / (2.0 * h), rel, 1e-8,
                   tag + " db");
    }
  }
}

}  // namespace

TEST(SampleBatch, DeterministicAndInsideBox) {
  const SamplingBox box = vehicle_box();
  std::mt19937_64 rng_a(9), rng_b(9), rng_c(10);
  const Batch a = sample_batch(box, 64, rng_a);
  const Batch b = sample_batch(box, 64, rng_b);
  const Batch c = sample_batch(box, 64, rng_c);

  ASSERT_EQ(a.states.rows(), 4);
  ASSERT_EQ(a.states.cols(), 64);
  ASSERT_EQ(a.times.cols(), 64);
  EXPECT_TRUE(a.states == b.states);
  EXPECT_TRUE(a.times == b.times);
  EXPECT_FALSE(a.states == c.states);

  for (int j = 0; j < 64; ++j) {
    for (int i = 0; i < 4; ++i) {
      EXPECT_GE(a.states(i, j), box.state_bounds[i][0]);
      EXPECT_LE(a.states(i, j), box.state_bounds[i][1]);
    }
    EXPECT_GE(a.times(j), box.t_min);
    EXPECT_LE(a.times(j), box.t_max);
  }

  // consecutive draws from one generator continue the stream
  std::mt19937_64 rng_d(9);
  const Batch d1 = sample_batch(box, 32, rng_d);
  const Batch d2 = sample_batch(box, 32, rng_d);
  EXPECT_TRUE(d1.states == a.states.leftCols(32));
  EXPECT_FALSE(d2.states == a.states.leftCols(32));
}

TEST(DefaultArchs, ShapesAndHeads) {
  const auto critic = default_critic_arch(4, 3, 32);
  ASSERT_EQ(critic.size(), 4u);
  EXPECT_EQ(critic.front().input_width, 5);
  EXPECT_EQ(critic.back().output_width, 1);
  for (size_t k = 0; k + 1 < critic.size(); ++k) {
    EXPECT_EQ(critic[k].activation, Activation::kElu);
    EXPECT_EQ(critic[k].output_width, 32);
  }
  EXPECT_EQ(critic.back().activation, Activation::kSoftplus);

  const auto actor = default_actor_arch(4, 3, 32, 0.35);
  ASSERT_EQ(actor.size(), 4u);
  EXPECT_EQ(actor.back().activation, Activation::kScaledTanh);
  EXPECT_DOUBLE_EQ(actor.back().scale, 0.35);
  EXPECT_NO_THROW(validate_specs(critic));
  EXPECT_NO_THROW(validate_specs(actor));
}

TEST(CriticStep, ResidualAtHorizonEndIsPureValueGradientTerm) {
  // with every sample at t = T the rollout is trivial and the target equals
  // the current running cost, so the residual collapses to <dV/dx, f>
  const OcpInstance ocp = vehicle_ocp();
  const MlpParams actor = mlp_init(default_actor_arch(4, 1, 6, 0.35), 2);
  const MlpParams critic = mlp_init(default_critic_arch(4, 1, 6), 3);

  Batch batch;
  batch.states = (MatrixXd(4, 2) << 1.0, -0.5, 0.1, 0.2, 0.0, -0.3, 0.4, 0.6).finished();
  batch.times = RowVectorXd::Constant(2, ocp.horizon.t_final);

  const CriticStepResult res = critic_step(batch, actor, critic, ocp, 0.0);

  double expected_j = 0.0, expected_abs = 0.0;
  for (int j = 0; j < 2; ++j) {
    const VectorXd x = batch.states.col(j);
    VectorXd xi(5);
    xi << x, ocp.horizon.t_final;
    ForwardCache cache;
    const double u = mlp_forward(actor, xi, cache)(0);
    ForwardCache vc;
    mlp_forward(critic, xi, vc);
    const VectorXd vgrad = input_grad(critic, vc);
    const double residual = vgrad.head(4).dot(ocp.plant.derivative(x, u));
    expected_j += 0.5 * residual * residual;
    expected_abs += std::abs(residual);
  }
  expected_j /= 2.0;
  expected_abs /= 2.0;
  EXPECT_NEAR(res.j_critic, expected_j, 1e-12 * std::max(1.0, expected_j));
  EXPECT_NEAR(res.mean_abs_residual, expected_abs, 1e-12);
}

TEST(CriticStep, GradientMatchesFiniteDifferenceOfLoss) {
  const OcpInstance ocp = vehicle_ocp();
  const MlpParams actor = mlp_init(default_actor_arch(4, 1, 6, 0.35), 12);
  const MlpParams critic = mlp_init(default_critic_arch(4, 1, 6), 13);

  std::mt19937_64 rng(7);
  Batch batch = sample_batch(vehicle_box(), 8, rng);

  const CriticStepResult res = critic_step(batch, actor, critic, ocp, 0.0);
  check_param_gradient(
      critic, res.grad,
      [&](const MlpParams& c) { return critic_step(batch, actor, c, ocp, 0.0).j_critic; },
      5, 1e-4, "critic");
}

TEST(CriticStep, TerminalPinGradientMatchesFiniteDifference) {
  const OcpInstance ocp = vehicle_ocp();
  const MlpParams actor = mlp_init(default_actor_arch(4, 1, 6, 0.35), 22);
  const MlpParams critic = mlp_init(default_critic_arch(4, 1, 6), 23);
  const double lambda = 0.7;

  std::mt19937_64 rng(8);
  Batch batch = sample_batch(vehicle_box(), 6, rng);

  const CriticStepResult pinned = critic_step(batch, actor, critic, ocp, lambda);
  const CriticStepResult plain = critic_step(batch, actor, critic, ocp, 0.0);
  EXPECT_GT(pinned.j_critic, plain.j_critic);  // softplus head is positive

  check_param_gradient(
      critic, pinned.grad,
      [&](const MlpParams& c) {
        return critic_step(batch, actor, c, ocp, lambda).j_critic;
      },
      5, 1e-4, "pinned critic");
}

TEST(ActorStep, GradientMatchesFiniteDifferenceOfLoss) {
  const OcpInstance ocp = vehicle_ocp();
  const MlpParams actor = mlp_init(default_actor_arch(4, 1, 6, 0.35), 32);
  const MlpParams critic = mlp_init(default_critic_arch(4, 1, 6), 33);

  std::mt19937_64 rng(9);
  Batch batch = sample_batch(vehicle_box(), 8, rng);

  const ActorStepResult res = actor_step(batch, actor, critic, ocp);
  check_param_gradient(
      actor, res.grad,
      [&](const MlpParams& a) { return actor_step(batch, a, critic, ocp).j_actor; },
      5, 1e-4, "actor");
}

TEST(ActorStep, LossIsMeanHamiltonian) {
  const OcpInstance ocp = vehicle_ocp();
  const MlpParams actor = mlp_init(default_actor_arch(4, 1, 6, 0.35), 42);
  const MlpParams critic = mlp_init(default_critic_arch(4, 1, 6), 43);

  std::mt19937_64 rng(10);
  Batch batch = sample_batch(vehicle_box(), 5, rng);
  const ActorStepResult res = actor_step(batch, actor, critic, ocp);

  double expected = 0.0;
  for (int j = 0; j < 5; ++j) {
    const VectorXd x = batch.states.col(j);
    VectorXd xi(5);
    xi << x, batch.times(j);
    ForwardCache ac, vc;
    const double u = mlp_forward(actor, xi, ac)(0);
    mlp_forward(critic, xi, vc);
    const VectorXd vgrad = input_grad(critic, vc);
    expected += hamiltonian(x, u, vgrad.head(4), ocp.plant, ocp.weights);
  }
  expected /= 5.0;
  EXPECT_NEAR(res.j_actor, expected, 1e-12 * std::max(1.0, std::abs(expected)));
}

TEST(Train, RunsAreReproducible) {
  const TrainConfig tc = small_vehicle_config();
  const TrainResult r1 = train(tc);
  const TrainResult r2 = train(tc);

  ASSERT_EQ(r1.log.records.size(), r2.log.records.size());
  ASSERT_GT(r1.log.records.size(), 0u);
  for (size_t i = 0; i < r1.log.records.size(); ++i) {
    const TrainingRecord& a = r1.log.records[i];
    const TrainingRecord& b = r2.log.records[i];
    EXPECT_EQ(a.iteration, b.iteration);
    // wall-clock differs between runs; everything else must not
    EXPECT_EQ(a.j_critic, b.j_critic);
    EXPECT_EQ(a.j_actor, b.j_actor);
    EXPECT_EQ(a.hamiltonian_residual, b.hamiltonian_residual);
    EXPECT_TRUE(std::isnan(a.policy_error) && std::isnan(b.policy_error));
  }
  for (size_t k = 0; k < r1.policy.actor.layers.size(); ++k) {
    EXPECT_TRUE(r1.policy.actor.layers[k].weights == r2.policy.actor.layers[k].weights);
    EXPECT_TRUE(r1.policy.critic.layers[k].weights == r2.policy.critic.layers[k].weights);
  }
}

TEST(Train, SeedChangesTheRun) {
  TrainConfig tc = small_vehicle_config();
  const TrainResult r1 = train(tc);
  tc.seed = 1;
  const TrainResult r2 = train(tc);
  EXPECT_NE(r1.log.records.back().j_critic, r2.log.records.back().j_critic);
}

TEST(Train, LogCadenceIncludesFinalIteration) {
  TrainConfig tc = small_vehicle_config();
  tc.max_iterations = 250;
  tc.eval_every = 100;

  int on_eval_calls = 0;
  TrainHooks hooks;
  hooks.policy_error = [](const MlpParams&) { return 0.125; };
  hooks.on_eval = [&](const TrainingRecord& rec, const TrainedPolicy& policy) {
    ++on_eval_calls;
    EXPECT_FALSE(policy.actor.layers.empty());
    EXPECT_DOUBLE_EQ(rec.policy_error, 0.125);
  };

  const TrainResult r = train(tc, hooks);
  ASSERT_EQ(r.log.records.size(), 3u);
  EXPECT_EQ(r.log.records[0].iteration, 100);
  EXPECT_EQ(r.log.records[1].iteration, 200);
  EXPECT_EQ(r.log.records[2].iteration, 250);
  EXPECT_EQ(on_eval_calls, 3);
  EXPECT_EQ(r.final_iteration, 250);
  EXPECT_FALSE(r.diverged);
  EXPECT_FALSE(r.stopped_on_plateau);
  for (const TrainingRecord& rec : r.log.records) {
    EXPECT_GT(rec.j_critic_ma, 0.0);
    EXPECT_GE(rec.elapsed_s, 0.0);
  }
}

TEST(Train, PlateauStopsEarly) {
  // learning rates so small the losses cannot move, over a near-point box so
  // the batch-to-batch loss variance is ~0: the moving averages freeze and
  // the run must stop right after two full windows
  TrainConfig tc;
  tc.ocp.plant = decay_plant();
  tc.ocp.weights = UtilityWeights{0.4, 280.0};
  tc.ocp.horizon = Horizon{0.5, 0.005};
  tc.ocp.control_bound = 0.35;
  tc.box.state_bounds = {{0.5, 0.5 + 1e-12}};
  tc.box.t_min = 0.45;
  tc.box.t_max = 0.45;
  tc.critic_arch = default_critic_arch(1, 1, 4);
  tc.actor_arch = default_actor_arch(1, 1, 4, 0.35);
  tc.batch_size = 2;
  tc.lr_critic = 1e-300;
  tc.lr_actor = 1e-300;
  tc.max_iterations = 10000;
  tc.eval_every = 1000;

  const TrainResult r = train(tc);
  EXPECT_TRUE(r.stopped_on_plateau);
  EXPECT_EQ(r.final_iteration, 2000);
  EXPECT_EQ(r.log.records.back().iteration, 2000);
  EXPECT_FALSE(r.diverged);
}

TEST(Train, DivergenceIsReportedNotThrown) {
  TrainConfig tc = small_vehicle_config();
  tc.lr_critic = 1e100;
  tc.lr_actor = 1e100;
  tc.max_iterations = 600;
  tc.eval_every = 50;

  const TrainResult r = train(tc);
  EXPECT_TRUE(r.diverged);
  EXPECT_GT(r.diverged_at, 0);
  EXPECT_FALSE(r.divergence_message.empty());
  // the returned policy is the last logged snapshot and still usable
  ASSERT_FALSE(r.policy.actor.layers.empty());
  EXPECT_TRUE(r.policy.actor.all_finite());
}

TEST(Train, ZeroIterationsIsANoOp) {
  TrainConfig tc = small_vehicle_config();
  tc.max_iterations = 0;
  const TrainResult r = train(tc);

  EXPECT_TRUE(r.log.records.empty());
  EXPECT_EQ(r.final_iteration, 0);
  EXPECT_FALSE(r.diverged);

  const MlpParams critic0 = mlp_init(tc.critic_arch, tc.seed);
  const MlpParams actor0 = mlp_init(tc.actor_arch, tc.seed + 1);
  ASSERT_EQ(r.policy.critic.layers.size(), critic0.layers.size());
  ASSERT_EQ(r.policy.actor.layers.size(), actor0.layers.size());
  for (size_t k = 0; k < critic0.layers.size(); ++k) {
    EXPECT_TRUE(r.policy.critic.layers[k].weights == critic0.layers[k].weights);
    EXPECT_TRUE(r.policy.critic.layers[k].bias == critic0.layers[k].bias);
  }
  for (size_t k = 0; k < actor0.layers.size(); ++k) {
    EXPECT_TRUE(r.policy.actor.layers[k].weights == actor0.layers[k].weights);
    EXPECT_TRUE(r.policy.actor.layers[k].bias == actor0.layers[k].bias);
  }

  tc.max_iterations = -1;
  EXPECT_THROW(tc.validate(), ConfigError);
}

TEST(Train, ValidationErrors) {
  TrainConfig tc = small_vehicle_config();
  tc.batch_size = 0;
  EXPECT_THROW(tc.validate(), ConfigError);
  tc = small_vehicle_config();
  tc.critic_arch = default_critic_arch(3, 1, 4);  // wrong input width
  EXPECT_THROW(tc.validate(), ConfigError);
  tc = small_vehicle_config();
  tc.lr_actor = 0.0;
  EXPECT_THROW(tc.validate(), ConfigError);
  EXPECT_NO_THROW(small_vehicle_config().validate());
}

TEST(PolicyEval, RespectsControlBoundAndMatchesController) {
  const MlpParams actor = mlp_init(default_actor_arch(4, 3, 32, 0.35), 77);
  const Controller pi = make_policy_controller(actor);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unif(-5.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    VectorXd x(4);
    for (int i = 0; i < 4; ++i) x(i) = unif(rng);
    const double t = 0.05 * (trial % 10);
    const double u = policy_eval(actor, x, t);
    EXPECT_LE(std::abs(u), 0.35);
    EXPECT_DOUBLE_EQ(pi(x, t), u);
  }
}

TEST(TrainingLogCsv, GoldenHeaderAndNanHandling) {
  namespace fs = std::filesystem;
  const fs::path path = fs::temp_directory_path() /
                        ("hjbadp_log_" + std::to_string(::getpid()) + ".csv");

  TrainingLog log;
  TrainingRecord rec;
  rec.iteration = 500;
  rec.j_critic = 0.125;
  rec.j_actor = 1.0 / 3.0;
  rec.hamiltonian_residual = 0.25;
  rec.policy_error = std::numeric_limits<double>::quiet_NaN();
  rec.elapsed_s = 1.5;
  log.records.push_back(rec);
  rec.iteration = 1000;
  rec.policy_error = 0.0625;
  log.records.push_back(rec);

  write_training_log_csv(path, log);
  std::ifstream in(path);
  std::string header, line1, line2;
  std::getline(in, header);
  std::getline(in, line1);
  std::getline(in, line2);
  EXPECT_EQ(header,
            "iteration,j_critic,j_actor,hamiltonian_residual,policy_error,elapsed_s");
  EXPECT_NE(line1.find("500,0.125,"), std::string::npos);
  EXPECT_NE(line1.find(",nan,"), std::string::npos);
  EXPECT_NE(line2.find(",0.0625,"), std::string::npos);
  // j_actor must round-trip through the printed representation
  const size_t c1 = line1.find(',', line1.find(',') + 1);
  const size_t c2 = line1.find(',', c1 + 1);
  const double back = std::stod(line1.substr(c1 + 1, c2 - c1 - 1));
  EXPECT_EQ(back, 1.0 / 3.0);
  fs::remove(path);
}
