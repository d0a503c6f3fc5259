#include "glitch/numerics/adam.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace glitch {

void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("adam_step: " + std::to_string(params.size()) + " params but " +
                                std::to_string(grads.size()) + " gradients");
  }
  if (state.m.empty() && state.step == 0) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0f);
      state.v.emplace_back(p.size(), 0.0f);
    }
  }
  if (state.m.size() != params.size()) throw std::invalid_argument("adam_step: state tracks a different parameter set");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].shape() != grads[i].shape() || state.m[i].size() != params[i].size()) {
      throw std::invalid_argument("adam_step: shape mismatch for parameter " + std::to_string(i) + ": " +
                                  to_string(params[i].shape()) + " vs gradient " + to_string(grads[i].shape()));
    }
  }

  ++state.step;
  state.beta1_power *= state.beta1;
  state.beta2_power *= state.beta2;
  const auto correction1 = static_cast<float>(1.0 - state.beta1_power);
  const auto correction2 = static_cast<float>(1.0 - state.beta2_power);

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].to_vector();
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto g = grads[i].data();
    for (std::size_t j = 0; j < values.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0f - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0f - state.beta2) * g[j] * g[j];
      const float m_hat = m[j] / correction1;
      const float v_hat = v[j] / correction2;
      values[j] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
    params[i] = Tensor(params[i].shape(), std::move(values));
  }
}

}  // namespace glitch
