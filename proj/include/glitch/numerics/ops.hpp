#pragma once

#include <span>

#include "glitch/numerics/autograd.hpp"

namespace glitch::nn {

// Every op accepts tracked or constant Vars and records a backward rule on
// the inputs' tape when any input is tracked. Shapes use NCHW for images
// and [N, features] for dense data.

struct Conv2dOptions {
  int stride = 1;
  int padding = 1;
};

/// input [N,C,H,W], weight [O,C,KH,KW], bias [O] -> [N,O,H',W'] with
/// H' = (H + 2*padding - KH) / stride + 1.
Var conv2d(const Var& input, const Var& weight, const Var& bias, Conv2dOptions options = {});

/// Running statistics of a batchnorm layer. Not differentiable.
struct BatchNormStats {
  Tensor running_mean;
  Tensor running_var;
};

struct BatchNormOptions {
  float epsilon = 1e-5f;
  float momentum = 0.1f;
};

/// Per-channel normalization of [N,C,H,W].
///
/// Training mode normalizes with biased batch statistics and blends the
/// unbiased batch variance into `stats`; inference mode reads `stats` only.
Var batchnorm2d(const Var& input, const Var& gamma, const Var& beta, BatchNormStats& stats, bool training,
                BatchNormOptions options = {});

/// Window max over [N,C,H,W]. Gradient flows to the first maximal cell in
/// scan order.
Var maxpool2d(const Var& input, int size, int stride);

/// input [N,in] · weightᵀ [in,out] + bias [out].
Var linear(const Var& input, const Var& weight, const Var& bias);

/// max(0, x); the derivative at exactly 0 is taken as 0.
Var relu(const Var& input);

/// Collapses all trailing dimensions: [N, ...] -> [N, prod(...)].
Var flatten(const Var& input);

/// Row-wise softmax of [N,K] logits, shifted by the row max.
Var softmax(const Var& logits);

/// Mean over the batch of -log softmax(logits)[label].
Var cross_entropy(const Var& logits, std::span<const int> labels);

/// Sum of all elements, as a scalar.
Var sum(const Var& input);

/// Elementwise ops on equal shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);

/// Sum over the batch of logits[n, column], as a scalar.
Var select_column(const Var& logits, int column);

/// Plain-tensor softmax for inference.
Tensor softmax(const Tensor& logits);

}  // namespace glitch::nn
