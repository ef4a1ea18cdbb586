#include "hjbadp/adam.hpp"

#include <cmath>
#include <string>

namespace hjbadp {

AdamState adam_init(const MlpParams& params) {
  AdamState s;
  s.first_moment = zeros_like(params);
  s.second_moment = zeros_like(params);
  s.step_count = 0;
  return s;
}

namespace {

template <typename Block>
void update_block(Block& param, Block& m, Block& v, const Block& g, const AdamState& st,
                  double lr, double bc1, double bc2) {
  m = st.beta1 * m + (1.0 - st.beta1) * g;
  v = (st.beta2 * v.array() + (1.0 - st.beta2) * g.array().square()).matrix();
  const auto m_hat = m.array() / bc1;
  const auto v_hat = v.array() / bc2;
  param.array() -= lr * m_hat / (v_hat.sqrt() + st.epsilon);
}

}  // namespace

std::pair<MlpParams, AdamState> adam_step(const MlpParams& params, const ParamGradient& grad,
                                          const AdamState& state, double learning_rate) {
  if (grad.layers.size() != params.layers.size() ||
      state.first_moment.layers.size() != params.layers.size()) {
    throw ContractError("adam_step: gradient/state layer count does not match parameters");
  }
  if (!grad.all_finite()) {
    throw DivergenceError("adam_step: non-finite gradient");
  }
  MlpParams out = params;
  AdamState st = state;
  st.step_count += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step_count));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step_count));
  for (size_t k = 0; k < params.layers.size(); ++k) {
    const MlpLayer& gl = grad.layers[k];
    MlpLayer& pl = out.layers[k];
    if (gl.weights.rows() != pl.weights.rows() || gl.weights.cols() != pl.weights.cols() ||
        gl.bias.size() != pl.bias.size()) {
      throw ContractError("adam_step: layer " + std::to_string(k) + " shape mismatch");
    }
    update_block(pl.weights, st.first_moment.layers[k].weights, st.second_moment.layers[k].weights,
                 gl.weights, st, learning_rate, bc1, bc2);
    update_block(pl.bias, st.first_moment.layers[k].bias, st.second_moment.layers[k].bias,
                 gl.bias, st, learning_rate, bc1, bc2);
  }
  if (!out.all_finite()) {
    throw DivergenceError("adam_step: update produced non-finite parameters");
  }
  return {std::move(out), std::move(st)};
}

}  // namespace hjbadp
