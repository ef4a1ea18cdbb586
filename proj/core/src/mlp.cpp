#include "hjbadp/mlp.hpp"

#include <cmath>
#include <random>
#include <string>

namespace hjbadp {

void validate_specs(const std::vector<LayerSpec>& specs) {
  if (specs.empty()) throw ConfigError("network needs at least one layer");
  for (size_t k = 0; k < specs.size(); ++k) {
    const LayerSpec& s = specs[k];
    if (s.input_width <= 0 || s.output_width <= 0) {
      throw ConfigError("layer " + std::to_string(k) + ": widths must be positive");
    }
    if (s.activation == Activation::kScaledTanh && !(s.scale > 0.0)) {
      throw ConfigError("layer " + std::to_string(k) + ": scaled_tanh scale must be positive");
    }
    if (k > 0 && specs[k - 1].output_width != s.input_width) {
      throw ConfigError("layer " + std::to_string(k) + ": input width " +
                        std::to_string(s.input_width) + " does not match previous output width " +
                        std::to_string(specs[k - 1].output_width));
    }
  }
}

bool MlpParams::all_finite() const {
  for (const MlpLayer& l : layers) {
    if (!l.weights.allFinite() || !l.bias.allFinite()) return false;
  }
  return true;
}

ParamGradient zeros_like(const MlpParams& p) {
  ParamGradient g;
  g.layers.reserve(p.layers.size());
  for (const MlpLayer& l : p.layers) {
    MlpLayer zl;
    zl.spec = l.spec;
    zl.weights = Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols());
    zl.bias = Eigen::VectorXd::Zero(l.bias.size());
    g.layers.push_back(std::move(zl));
  }
  return g;
}

void axpy(MlpParams& dst, const MlpParams& src, double scale) {
  if (dst.layers.size() != src.layers.size()) {
    throw ContractError("axpy: layer count mismatch");
  }
  for (size_t k = 0; k < dst.layers.size(); ++k) {
    if (dst.layers[k].weights.rows() != src.layers[k].weights.rows() ||
        dst.layers[k].weights.cols() != src.layers[k].weights.cols()) {
      throw ContractError("axpy: layer " + std::to_string(k) + " shape mismatch");
    }
    dst.layers[k].weights.noalias() += scale * src.layers[k].weights;
    dst.layers[k].bias.noalias() += scale * src.layers[k].bias;
  }
}

namespace {

// 53-bit uniform in [0, 1); keeps initialization identical across platforms.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void check_cache(const MlpParams& p, const ForwardCache& cache, bool need_tangent) {
  const size_t nl = p.layers.size();
  if (cache.pre.size() != nl || cache.post.size() != nl) {
    throw ContractError("forward cache does not match network depth");
  }
  if (cache.input.rows() != p.input_width()) {
    throw ContractError("forward cache input width does not match network");
  }
  const Eigen::Index m = cache.input.cols();
  for (size_t k = 0; k < nl; ++k) {
    if (cache.pre[k].rows() != p.layers[k].spec.output_width || cache.pre[k].cols() != m) {
      throw ContractError("stale forward cache at layer " + std::to_string(k));
    }
  }
  if (need_tangent) {
    if (!cache.has_tangent || cache.pre_dot.size() != nl || cache.input_dot.cols() != m) {
      throw ContractError("cache has no tangent stream; run forward_tangent_batch first");
    }
  }
}

void require_scalar_output(const MlpParams& p, const char* op) {
  if (p.output_width() != 1) {
    throw ContractError(std::string(op) + " requires a scalar-output network");
  }
}

}  // namespace

MlpParams mlp_init(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
  validate_specs(specs);
  std::mt19937_64 rng(seed);
  MlpParams p;
  p.layers.reserve(specs.size());
  for (const LayerSpec& s : specs) {
    MlpLayer l;
    l.spec = s;
    l.weights.resize(s.output_width, s.input_width);
    const double bound = std::sqrt(6.0 / (s.input_width + s.output_width));
    for (int i = 0; i < s.output_width; ++i) {
      for (int j = 0; j < s.input_width; ++j) {
        l.weights(i, j) = bound * (2.0 * uniform01(rng) - 1.0);
      }
    }
    l.bias = Eigen::VectorXd::Zero(s.output_width);
    p.layers.push_back(std::move(l));
  }
  return p;
}

Eigen::MatrixXd mlp_forward_batch(const MlpParams& p, const ConstMatRef& input,
                                  ForwardCache& cache) {
  if (p.layers.empty()) throw ContractError("forward on empty network");
  if (input.rows() != p.input_width()) {
    throw DimensionError("forward: input has " + std::to_string(input.rows()) +
                         " rows, network expects " + std::to_string(p.input_width()));
  }
  const size_t nl = p.layers.size();
  cache.input = input;
  cache.pre.resize(nl);
  cache.post.resize(nl);
  cache.has_tangent = false;
  const Eigen::MatrixXd* a = &cache.input;
  for (size_t k = 0; k < nl; ++k) {
    const MlpLayer& l = p.layers[k];
    cache.pre[k].resize(l.spec.output_width, input.cols());
    cache.pre[k].noalias() = l.weights * (*a);
    cache.pre[k].colwise() += l.bias;
    act_value(l.spec.activation, l.spec.scale, cache.pre[k], cache.post[k]);
    a = &cache.post[k];
  }
  return cache.post.back();
}

Eigen::VectorXd mlp_forward(const MlpParams& p,
                            const Eigen::Ref<const Eigen::VectorXd>& input,
                            ForwardCache& cache) {
  return mlp_forward_batch(p, input, cache).col(0);
}

ParamGradient param_grad_batch(const MlpParams& p, const ForwardCache& cache,
                               const ConstMatRef& upstream) {
  check_cache(p, cache, false);
  if (upstream.rows() != p.output_width() || upstream.cols() != cache.cols()) {
    throw DimensionError("param_grad: upstream must be (output_width x batch)");
  }
  ParamGradient g = zeros_like(p);
  const int nl = static_cast<int>(p.layers.size());
  Eigen::MatrixXd delta = upstream;  // adjoint of post-activation
  Eigen::MatrixXd d1, dz;
  for (int k = nl - 1; k >= 0; --k) {
    const MlpLayer& l = p.layers[k];
    act_d1(l.spec.activation, l.spec.scale, cache.pre[k], d1);
    dz = delta.cwiseProduct(d1);  // adjoint of pre-activation
    const Eigen::MatrixXd& below = (k == 0) ? cache.input : cache.post[k - 1];
    g.layers[k].weights.noalias() = dz * below.transpose();
    g.layers[k].bias.noalias() = dz.rowwise().sum();
    if (k > 0) delta.noalias() = l.weights.transpose() * dz;
  }
  return g;
}

ParamGradient param_grad(const MlpParams& p, const ForwardCache& cache,
                         const Eigen::Ref<const Eigen::VectorXd>& upstream) {
  if (cache.cols() != 1) {
    throw ContractError("param_grad with a vector upstream expects a single-column cache");
  }
  return param_grad_batch(p, cache, upstream);
}

Eigen::MatrixXd input_grad_batch(const MlpParams& p, const ForwardCache& cache) {
  require_scalar_output(p, "input_grad");
  check_cache(p, cache, false);
  const int nl = static_cast<int>(p.layers.size());
  Eigen::MatrixXd delta = Eigen::MatrixXd::Ones(1, cache.cols());
  Eigen::MatrixXd d1, dz;
  for (int k = nl - 1; k >= 0; --k) {
    const MlpLayer& l = p.layers[k];
    act_d1(l.spec.activation, l.spec.scale, cache.pre[k], d1);
    dz = delta.cwiseProduct(d1);
    delta.resize(l.spec.input_width, cache.cols());
    delta.noalias() = l.weights.transpose() * dz;
  }
  return delta;
}

Eigen::VectorXd input_grad(const MlpParams& p, const ForwardCache& cache) {
  if (cache.cols() != 1) {
    throw ContractError("input_grad expects a single-column cache; use input_grad_batch");
  }
  return input_grad_batch(p, cache).col(0);
}

Eigen::RowVectorXd forward_tangent_batch(const MlpParams& p, const ConstMatRef& direction,
                                         ForwardCache& cache) {
  require_scalar_output(p, "directional_derivative");
  check_cache(p, cache, false);
  if (direction.rows() != p.input_width() || direction.cols() != cache.cols()) {
    throw DimensionError("tangent direction must be (input_width x batch)");
  }
  const size_t nl = p.layers.size();
  cache.input_dot = direction;
  cache.pre_dot.resize(nl);
  cache.post_dot.resize(nl);
  Eigen::MatrixXd d1;
  const Eigen::MatrixXd* ad = &cache.input_dot;
  for (size_t k = 0; k < nl; ++k) {
    const MlpLayer& l = p.layers[k];
    cache.pre_dot[k].resize(l.spec.output_width, cache.cols());
    cache.pre_dot[k].noalias() = l.weights * (*ad);
    act_d1(l.spec.activation, l.spec.scale, cache.pre[k], d1);
    cache.post_dot[k] = d1.cwiseProduct(cache.pre_dot[k]);
    ad = &cache.post_dot[k];
  }
  cache.has_tangent = true;
  return cache.post_dot.back().row(0);
}

double directional_derivative(const MlpParams& p,
                              const Eigen::Ref<const Eigen::VectorXd>& input,
                              const Eigen::Ref<const Eigen::VectorXd>& direction) {
  if (direction.size() != input.size()) {
    throw DimensionError("directional_derivative: direction length must match input length");
  }
  ForwardCache cache;
  mlp_forward_batch(p, input, cache);
  return forward_tangent_batch(p, direction, cache)(0);
}

ParamGradient mixed_param_grad_batch(const MlpParams& p, const ForwardCache& cache,
                                     const ConstRowRef& seeds) {
  require_scalar_output(p, "mixed_param_grad");
  check_cache(p, cache, true);
  if (seeds.size() != cache.cols()) {
    throw DimensionError("mixed_param_grad: one seed per cached column required");
  }
  ParamGradient g = zeros_like(p);
  const int nl = static_cast<int>(p.layers.size());
  // lambda: adjoint of the primal activations, mu: adjoint of the tangents.
  Eigen::MatrixXd mu = seeds;
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(1, cache.cols());
  Eigen::MatrixXd d1, d2, dz, dzdot;
  for (int k = nl - 1; k >= 0; --k) {
    const MlpLayer& l = p.layers[k];
    act_d1(l.spec.activation, l.spec.scale, cache.pre[k], d1);
    act_d2(l.spec.activation, l.spec.scale, cache.pre[k], d2);
    dzdot = mu.cwiseProduct(d1);
    dz = lambda.cwiseProduct(d1) + mu.cwiseProduct(d2).cwiseProduct(cache.pre_dot[k]);
    const Eigen::MatrixXd& below = (k == 0) ? cache.input : cache.post[k - 1];
    const Eigen::MatrixXd& below_dot = (k == 0) ? cache.input_dot : cache.post_dot[k - 1];
    g.layers[k].weights.noalias() = dz * below.transpose();
    g.layers[k].weights.noalias() += dzdot * below_dot.transpose();
    g.layers[k].bias.noalias() = dz.rowwise().sum();
    if (k > 0) {
      lambda.resize(l.spec.input_width, cache.cols());
      lambda.noalias() = l.weights.transpose() * dz;
      Eigen::MatrixXd mu_next(l.spec.input_width, cache.cols());
      mu_next.noalias() = l.weights.transpose() * dzdot;
      mu.swap(mu_next);
    }
  }
  return g;
}

ParamGradient mixed_param_grad(const MlpParams& p,
                               const Eigen::Ref<const Eigen::VectorXd>& input,
                               const Eigen::Ref<const Eigen::VectorXd>& direction) {
  if (direction.size() != input.size()) {
    throw DimensionError("mixed_param_grad: direction length must match input length");
  }
  ForwardCache cache;
  mlp_forward_batch(p, input, cache);
  forward_tangent_batch(p, direction, cache);
  Eigen::RowVectorXd seeds(1);
  seeds(0) = 1.0;
  return mixed_param_grad_batch(p, cache, seeds);
}

}  // namespace hjbadp
