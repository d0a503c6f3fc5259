#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "glitch/numerics/tensor.hpp"

namespace glitch {

struct AdamState {
  float learning_rate = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;

  std::uint64_t step = 0;
  // beta^step, carried as running products so no pow() is involved.
  double beta1_power = 1.0;
  double beta2_power = 1.0;
  std::vector<std::vector<float>> m;
  std::vector<std::vector<float>> v;
};

/// One bias-corrected Adam update; replaces each params[i] with its updated
/// value. Moment buffers are created on the first call.
void adam_step(std::span<Tensor> params, std::span<const Tensor> grads, AdamState& state);

}  // namespace glitch
