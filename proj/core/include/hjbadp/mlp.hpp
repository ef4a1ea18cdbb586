#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "hjbadp/activations.hpp"
#include "hjbadp/errors.hpp"

namespace hjbadp {

// Const views that also bind matrix blocks / rows without copying.
using ConstMatRef = Eigen::Ref<const Eigen::MatrixXd, 0, Eigen::OuterStride<>>;
using ConstRowRef = Eigen::Ref<const Eigen::RowVectorXd, 0, Eigen::InnerStride<>>;

struct LayerSpec {
  int input_width = 0;
  int output_width = 0;
  Activation activation = Activation::kLinear;
  double scale = 1.0;  // output bound for kScaledTanh, ignored otherwise
};

// Throws ConfigError on empty stacks, non-positive widths, chained width
// mismatches, or non-positive scaled-tanh scale.
void validate_specs(const std::vector<LayerSpec>& specs);

struct MlpLayer {
  Eigen::MatrixXd weights;  // output_width x input_width
  Eigen::VectorXd bias;     // output_width
  LayerSpec spec;
};

struct MlpParams {
  std::vector<MlpLayer> layers;

  int input_width() const { return layers.empty() ? 0 : layers.front().spec.input_width; }
  int output_width() const { return layers.empty() ? 0 : layers.back().spec.output_width; }
  bool all_finite() const;
};

// Per-parameter partial derivatives, stored in the same layout as the
// parameters they belong to.
using ParamGradient = MlpParams;

ParamGradient zeros_like(const MlpParams& p);
void axpy(MlpParams& dst, const MlpParams& src, double scale);  // dst += scale*src

// Intermediate activations for one batched forward pass; column j of every
// buffer belongs to sample j.  The tangent stream is filled only by
// forward_tangent_batch.
struct ForwardCache {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> post;
  Eigen::MatrixXd input_dot;
  std::vector<Eigen::MatrixXd> pre_dot;
  std::vector<Eigen::MatrixXd> post_dot;
  bool has_tangent = false;

  Eigen::Index cols() const { return input.cols(); }
};

// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
// Entries are drawn row-major, layer by layer, from a mt19937_64 stream, so a
// given (specs, seed) pair reproduces bit-identical parameters everywhere.
MlpParams mlp_init(const std::vector<LayerSpec>& specs, std::uint64_t seed);

// Forward pass over a batch; `input` is (input_width x m).
Eigen::MatrixXd mlp_forward_batch(const MlpParams& p, const ConstMatRef& input,
                                  ForwardCache& cache);
Eigen::VectorXd mlp_forward(const MlpParams& p,
                            const Eigen::Ref<const Eigen::VectorXd>& input,
                            ForwardCache& cache);

// Gradient of sum_j upstream(:,j) . output(:,j) with respect to parameters,
// by reverse accumulation through `cache`.
ParamGradient param_grad_batch(const MlpParams& p, const ForwardCache& cache,
                               const ConstMatRef& upstream);
ParamGradient param_grad(const MlpParams& p, const ForwardCache& cache,
                         const Eigen::Ref<const Eigen::VectorXd>& upstream);

// Gradient of the scalar output with respect to the input, per column.
// Requires output_width == 1.
Eigen::MatrixXd input_grad_batch(const MlpParams& p, const ForwardCache& cache);
Eigen::VectorXd input_grad(const MlpParams& p, const ForwardCache& cache);

// Forward-mode (tangent) pass along `direction`; fills the cache's tangent
// stream and returns d(output_j)/d(epsilon) per column.  Exact, not a finite
// difference.  Requires output_width == 1 and a cache from a prior forward.
Eigen::RowVectorXd forward_tangent_batch(const MlpParams& p, const ConstMatRef& direction,
                                         ForwardCache& cache);
double directional_derivative(const MlpParams& p,
                              const Eigen::Ref<const Eigen::VectorXd>& input,
                              const Eigen::Ref<const Eigen::VectorXd>& direction);

// Gradient with respect to parameters of the directional derivative
// sum_j seeds(j) * d(output_j)/d(epsilon): reverse accumulation through the
// primal-plus-tangent computation (forward-over-reverse).  Requires a cache
// whose tangent stream was filled by forward_tangent_batch.
ParamGradient mixed_param_grad_batch(const MlpParams& p, const ForwardCache& cache,
                                     const ConstRowRef& seeds);
ParamGradient mixed_param_grad(const MlpParams& p,
                               const Eigen::Ref<const Eigen::VectorXd>& input,
                               const Eigen::Ref<const Eigen::VectorXd>& direction);

}  // namespace hjbadp
