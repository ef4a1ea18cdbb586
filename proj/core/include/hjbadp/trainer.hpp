#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "hjbadp/adam.hpp"
#include "hjbadp/ocp.hpp"

namespace hjbadp {

// Uniform sampling region for training states and times.
struct SamplingBox {
  std::vector<std::array<double, 2>> state_bounds;  // per dimension {lo, hi}
  double t_min = 0.0;
  double t_max = 0.5;

  void validate(int state_dim) const;
};

struct Batch {
  Eigen::MatrixXd states;     // state_dim x m
  Eigen::RowVectorXd times;  // 1 x m
};

// Draws state components then the time for each sample, in column order, from
// one generator, so batches are reproducible from the generator state alone.
Batch sample_batch(const SamplingBox& box, int count, std::mt19937_64& rng);

std::vector<LayerSpec> default_critic_arch(int state_dim, int hidden_layers, int width);
std::vector<LayerSpec> default_actor_arch(int state_dim, int hidden_layers, int width,
                                          double control_bound);

struct TrainConfig {
  OcpInstance ocp;
  SamplingBox box;
  std::vector<LayerSpec> critic_arch;
  std::vector<LayerSpec> actor_arch;
  int batch_size = 256;
  double lr_critic = 1e-3;
  double lr_actor = 1e-3;
  long max_iterations = 30000;
  long eval_every = 500;
  std::uint64_t seed = 0;
  double terminal_value_weight = 0.0;

  void validate() const;
};

struct TrainedPolicy {
  MlpParams actor;
  MlpParams critic;
};

struct TrainingRecord {
  long iteration = 0;
  double j_critic = 0.0;
  double j_actor = 0.0;
  double hamiltonian_residual = 0.0;  // mean |H - terminal utility| over the batch
  double policy_error = std::numeric_limits<double>::quiet_NaN();
  double elapsed_s = 0.0;
  double j_critic_ma = 0.0;  // trailing moving average, diagnostic only
};

struct TrainingLog {
  std::vector<TrainingRecord> records;
};

struct CriticStepResult {
  double j_critic = 0.0;
  double mean_abs_residual = 0.0;
  ParamGradient grad;
};

struct ActorStepResult {
  double j_actor = 0.0;
  ParamGradient grad;
};

// Critic regression: J = mean(residual^2)/2 where the residual is the
// Hamiltonian under the current policy minus the terminal utility of the
// policy rollout.  The gradient flows only through the <dV/dx, f> term (the
// target is treated as a constant), plus the optional terminal pin
// lambda * mean(V(xT, T)^2)/2.
CriticStepResult critic_step(const Batch& batch, const MlpParams& actor, const MlpParams& critic,
                             const OcpInstance& ocp, double terminal_value_weight);

// Policy improvement: J = mean(H) with gradient through the control only:
// dH/du = dl/du + (df/du)' dV/dx, chained through the actor.
ActorStepResult actor_step(const Batch& batch, const MlpParams& actor, const MlpParams& critic,
                           const OcpInstance& ocp);

struct TrainHooks {
  // Optional normalized policy error, evaluated at logging points.
  std::function<double(const MlpParams& actor)> policy_error;
  // Called at each logging point with the freshly appended record.
  std::function<void(const TrainingRecord&, const TrainedPolicy&)> on_eval;
};

struct TrainResult {
  TrainedPolicy policy;
  TrainingLog log;
  bool diverged = false;
  long diverged_at = 0;
  std::string divergence_message;
  bool stopped_on_plateau = false;
  long final_iteration = 0;
};

// Alternating critic/actor Adam updates on freshly sampled batches.  Stops at
// max_iterations or when the 1000-iteration moving averages of both losses
// change by less than 1e-6.  On divergence the last logged parameters are
// returned with the diverged flag set.
TrainResult train(const TrainConfig& config, const TrainHooks& hooks = {});

// Compiled-policy inference: steering for state x at time t.
double policy_eval(const MlpParams& actor, const Eigen::Ref<const Eigen::VectorXd>& x, double t);

Controller make_policy_controller(const MlpParams& actor);

void write_training_log_csv(const std::filesystem::path& path, const TrainingLog& log);

}  // namespace hjbadp
