#pragma once

#include <utility>

#include "hjbadp/mlp.hpp"

namespace hjbadp {

struct AdamState {
  MlpParams first_moment;
  MlpParams second_moment;
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

AdamState adam_init(const MlpParams& params);

// One bias-corrected Adam update.  Returns the updated parameters and state;
// the inputs are left untouched.  Throws DivergenceError on non-finite
// gradients and ContractError on shape mismatches.
std::pair<MlpParams, AdamState> adam_step(const MlpParams& params, const ParamGradient& grad,
                                          const AdamState& state, double learning_rate);

}  // namespace hjbadp
