#include "hjbadp/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

namespace hjbadp {

namespace {

constexpr long kPlateauWindow = 1000;
constexpr double kPlateauTol = 1e-6;

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

void SamplingBox::validate(int state_dim) const {
  if (static_cast<int>(state_bounds.size()) != state_dim) {
    throw ConfigError("sampling box must define bounds for every state dimension");
  }
  for (size_t i = 0; i < state_bounds.size(); ++i) {
    if (!(state_bounds[i][0] < state_bounds[i][1])) {
      throw ConfigError("sampling box dimension " + std::to_string(i) + " has empty range");
    }
  }
  if (!(t_min <= t_max) || t_min < 0.0) {
    throw ConfigError("sampling box time range must satisfy 0 <= t_min <= t_max");
  }
}

Batch sample_batch(const SamplingBox& box, int count, std::mt19937_64& rng) {
  if (count <= 0) throw ConfigError("sample_batch: count must be positive");
  const int n = static_cast<int>(box.state_bounds.size());
  Batch b;
  b.states.resize(n, count);
  b.times.resize(count);
  for (int j = 0; j < count; ++j) {
    for (int i = 0; i < n; ++i) {
      const auto& [lo, hi] = box.state_bounds[static_cast<size_t>(i)];
      b.states(i, j) = lo + uniform01(rng) * (hi - lo);
    }
    b.times(j) = box.t_min + uniform01(rng) * (box.t_max - box.t_min);
  }
  return b;
}

std::vector<LayerSpec> default_critic_arch(int state_dim, int hidden_layers, int width) {
  std::vector<LayerSpec> specs;
  int in = state_dim + 1;
  for (int k = 0; k < hidden_layers; ++k) {
    specs.push_back({in, width, Activation::kElu, 1.0});
    in = width;
  }
  specs.push_back({in, 1, Activation::kSoftplus, 1.0});
  return specs;
}

std::vector<LayerSpec> default_actor_arch(int state_dim, int hidden_layers, int width,
                                          double control_bound) {
  std::vector<LayerSpec> specs;
  int in = state_dim + 1;
  for (int k = 0; k < hidden_layers; ++k) {
    specs.push_back({in, width, Activation::kElu, 1.0});
    in = width;
  }
  specs.push_back({in, 1, Activation::kScaledTanh, control_bound});
  return specs;
}

void TrainConfig::validate() const {
  ocp.horizon.validate();
  box.validate(ocp.plant.state_dim);
  validate_specs(critic_arch);
  validate_specs(actor_arch);
  const int in = ocp.plant.state_dim + 1;
  if (critic_arch.front().input_width != in || actor_arch.front().input_width != in) {
    throw ConfigError("network input width must be state_dim + 1 (state and time)");
  }
  if (critic_arch.back().output_width != 1 || actor_arch.back().output_width != 1) {
    throw ConfigError("critic and actor must have scalar outputs");
  }
  if (batch_size <= 0) throw ConfigError("training.batch_size must be positive");
  if (!(lr_critic > 0.0) || !(lr_actor > 0.0)) throw ConfigError("learning rates must be positive");
  if (max_iterations < 0) throw ConfigError("training.max_iterations must be non-negative");
  if (eval_every < 1) throw ConfigError("training.eval_every must be at least 1");
  if (terminal_value_weight < 0.0) {
    throw ConfigError("training.terminal_value_weight must be non-negative");
  }
}

namespace {

// Shared forward work for both steps: policy output, plant derivative, running
// cost, critic input gradient, and the Hamiltonian row.
struct HamiltonianParts {
  Eigen::MatrixXd xi;       // (n+1) x m network input [x; t]
  Eigen::RowVectorXd u;     // policy output
  Eigen::MatrixXd f;        // plant derivative, n x m
  Eigen::RowVectorXd l;     // running cost
  Eigen::MatrixXd v_grad;   // critic d(output)/d(input), (n+1) x m
  Eigen::RowVectorXd h;     // Hamiltonian
  ForwardCache actor_cache;
  ForwardCache critic_cache;
};

void compute_hamiltonian_parts(const Batch& batch, const MlpParams& actor, const MlpParams& critic,
                               const OcpInstance& ocp, HamiltonianParts& parts) {
  const int n = ocp.plant.state_dim;
  const Eigen::Index m = batch.states.cols();
  if (batch.states.rows() != n) throw DimensionError("batch state rows must match plant.state_dim");
  if (batch.times.size() != m) throw DimensionError("batch needs one time per state column");
  parts.xi.resize(n + 1, m);
  parts.xi.topRows(n) = batch.states;
  parts.xi.row(n) = batch.times;
  parts.u = mlp_forward_batch(actor, parts.xi, parts.actor_cache).row(0);
  parts.f.resize(n, m);
  ocp.plant.derivative_batch(batch.states, parts.u, parts.f);
  parts.l = (ocp.weights.q * batch.states.row(0).array().square() +
             ocp.weights.r * parts.u.array().square())
                .matrix();
  mlp_forward_batch(critic, parts.xi, parts.critic_cache);
  parts.v_grad = input_grad_batch(critic, parts.critic_cache);
  parts.h = parts.l + (parts.v_grad.topRows(n).array() * parts.f.array()).colwise().sum().matrix();
}

}  // namespace

CriticStepResult critic_step(const Batch& batch, const MlpParams& actor, const MlpParams& critic,
                             const OcpInstance& ocp, double terminal_value_weight) {
  const int n = ocp.plant.state_dim;
  const Eigen::Index m = batch.states.cols();
  HamiltonianParts parts;
  compute_hamiltonian_parts(batch, actor, critic, ocp, parts);
  const BatchRollout roll = rollout_terminal_batch(actor, ocp, batch.states, batch.times);

  const Eigen::RowVectorXd residual = parts.h - roll.utility_final;
  CriticStepResult out;
  out.j_critic = 0.5 * residual.array().square().mean();
  out.mean_abs_residual = residual.array().abs().mean();

  // d residual / d critic params: tangent along [f; 0], reverse seeded by the
  // per-sample residual (mean absorbed into the seeds).
  Eigen::MatrixXd direction = Eigen::MatrixXd::Zero(n + 1, m);
  direction.topRows(n) = parts.f;
  forward_tangent_batch(critic, direction, parts.critic_cache);
  const Eigen::RowVectorXd seeds = residual / static_cast<double>(m);
  out.grad = mixed_param_grad_batch(critic, parts.critic_cache, seeds);

  if (terminal_value_weight > 0.0) {
    Eigen::MatrixXd xi_t(n + 1, m);
    xi_t.topRows(n) = roll.x_final;
    xi_t.row(n).setConstant(ocp.horizon.t_final);
    ForwardCache terminal_cache;
    const Eigen::RowVectorXd v_t = mlp_forward_batch(critic, xi_t, terminal_cache).row(0);
    out.j_critic += terminal_value_weight * 0.5 * v_t.array().square().mean();
    const Eigen::MatrixXd tseeds =
        (terminal_value_weight / static_cast<double>(m)) * v_t;
    axpy(out.grad, param_grad_batch(critic, terminal_cache, tseeds), 1.0);
  }
  if (!std::isfinite(out.j_critic)) throw DivergenceError("critic_step: non-finite loss");
  return out;
}

ActorStepResult actor_step(const Batch& batch, const MlpParams& actor, const MlpParams& critic,
                           const OcpInstance& ocp) {
  const int n = ocp.plant.state_dim;
  const Eigen::Index m = batch.states.cols();
  HamiltonianParts parts;
  compute_hamiltonian_parts(batch, actor, critic, ocp, parts);

  ActorStepResult out;
  out.j_actor = parts.h.mean();

  Eigen::MatrixXd dfdu(n, m);
  ocp.plant.control_jacobian_batch(batch.states, parts.u, dfdu);
  const Eigen::RowVectorXd dh_du =
      (2.0 * ocp.weights.r * parts.u.array() +
       (parts.v_grad.topRows(n).array() * dfdu.array()).colwise().sum())
          .matrix();
  const Eigen::MatrixXd upstream = dh_du / static_cast<double>(m);
  out.grad = param_grad_batch(actor, parts.actor_cache, upstream);
  if (!std::isfinite(out.j_actor)) throw DivergenceError("actor_step: non-finite loss");
  return out;
}

namespace {

double window_mean(const std::vector<double>& cumsum, long end, long window) {
  // cumsum[i] = sum of the first i values; mean over (end-window, end].
  return (cumsum[static_cast<size_t>(end)] - cumsum[static_cast<size_t>(end - window)]) /
         static_cast<double>(window);
}

}  // namespace

TrainResult train(const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  MlpParams critic = mlp_init(config.critic_arch, config.seed);
  MlpParams actor = mlp_init(config.actor_arch, config.seed + 1);
  AdamState critic_opt = adam_init(critic);
  AdamState actor_opt = adam_init(actor);
  std::mt19937_64 rng(config.seed + 2);

  TrainResult result;
  result.policy = {actor, critic};

  std::vector<double> jc_cumsum{0.0}, ja_cumsum{0.0};
  jc_cumsum.reserve(static_cast<size_t>(config.max_iterations) + 1);
  ja_cumsum.reserve(static_cast<size_t>(config.max_iterations) + 1);

  const auto t_start = std::chrono::steady_clock::now();
  for (long it = 1; it <= config.max_iterations; ++it) {
    const Batch batch = sample_batch(config.box, config.batch_size, rng);
    double jc = 0.0, ja = 0.0, residual = 0.0;
    try {
      CriticStepResult cs = critic_step(batch, actor, critic, config.ocp,
                                        config.terminal_value_weight);
      std::tie(critic, critic_opt) = adam_step(critic, cs.grad, critic_opt, config.lr_critic);
      ActorStepResult as = actor_step(batch, actor, critic, config.ocp);
      std::tie(actor, actor_opt) = adam_step(actor, as.grad, actor_opt, config.lr_actor);
      jc = cs.j_critic;
      ja = as.j_actor;
      residual = cs.mean_abs_residual;
    } catch (const NumericError& err) {
      result.diverged = true;
      result.diverged_at = it;
      result.divergence_message = err.what();
      result.final_iteration = it;
      return result;
    }
    jc_cumsum.push_back(jc_cumsum.back() + jc);
    ja_cumsum.push_back(ja_cumsum.back() + ja);

    bool plateau = false;
    if (it >= 2 * kPlateauWindow) {
      const double djc = window_mean(jc_cumsum, it, kPlateauWindow) -
                         window_mean(jc_cumsum, it - kPlateauWindow, kPlateauWindow);
      const double dja = window_mean(ja_cumsum, it, kPlateauWindow) -
                         window_mean(ja_cumsum, it - kPlateauWindow, kPlateauWindow);
      plateau = std::fabs(djc) < kPlateauTol && std::fabs(dja) < kPlateauTol;
    }
    const bool last = plateau || it == config.max_iterations;
    if (it % config.eval_every == 0 || last) {
      TrainingRecord rec;
      rec.iteration = it;
      rec.j_critic = jc;
      rec.j_actor = ja;
      rec.hamiltonian_residual = residual;
      rec.elapsed_s =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
      const long w = std::min<long>(kPlateauWindow, it);
      rec.j_critic_ma = window_mean(jc_cumsum, it, w);
      if (hooks.policy_error) rec.policy_error = hooks.policy_error(actor);
      result.policy = {actor, critic};
      result.log.records.push_back(rec);
      if (hooks.on_eval) hooks.on_eval(rec, result.policy);
    }
    result.final_iteration = it;
    if (plateau) {
      result.stopped_on_plateau = true;
      break;
    }
  }
  result.policy = {actor, critic};
  return result;
}

double policy_eval(const MlpParams& actor, const Eigen::Ref<const Eigen::VectorXd>& x, double t) {
  if (actor.input_width() != x.size() + 1 || actor.output_width() != 1) {
    throw DimensionError("policy_eval: actor must map [x; t] to a scalar control");
  }
  Eigen::VectorXd xi(x.size() + 1);
  xi.head(x.size()) = x;
  xi(x.size()) = t;
  ForwardCache cache;
  return mlp_forward(actor, xi, cache)(0);
}

Controller make_policy_controller(const MlpParams& actor) {
  return [actor](const Eigen::Ref<const Eigen::VectorXd>& x, double t) {
    return policy_eval(actor, x, t);
  };
}

void write_training_log_csv(const std::filesystem::path& path, const TrainingLog& log) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open training log for writing: " + path.string());
  out.precision(17);
  out << "iteration,j_critic,j_actor,hamiltonian_residual,policy_error,elapsed_s\n";
  for (const TrainingRecord& r : log.records) {
    out << r.iteration << ',' << r.j_critic << ',' << r.j_actor << ',' << r.hamiltonian_residual
        << ',' << r.policy_error << ',' << r.elapsed_s << '\n';
  }
}

}  // namespace hjbadp
