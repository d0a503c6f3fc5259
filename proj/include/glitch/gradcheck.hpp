#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glitch/numerics/autograd.hpp"

namespace glitch {

/// Finite-difference verification of analytic gradients.
struct GradcheckResult {
  std::string name;
  int instances = 0;
  /// Worst relative error over all instances:
  /// max|analytic - numeric| / max(max|numeric|, max|analytic|).
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed() const { return max_rel_error < tolerance; }
};

struct GradcheckReport {
  std::vector<GradcheckResult> results;
  bool passed() const;
};

using OpFn = std::function<Var(std::span<const Var>)>;

/// Relative error between the analytic gradient of sum(r * f(inputs)) and
/// its central difference (step h), taken over the gradient of all inputs
/// as one vector. r is a fixed uniform [-1, 1] weighting drawn from `seed`;
/// the objective is accumulated in double.
double gradient_rel_error(const OpFn& f, std::span<const Tensor> inputs, std::uint64_t seed, double h = 1e-3);

double relative_error(std::span<const double> analytic, std::span<const double> numeric);

/// Every layer op on `instances` seeded random inputs (h = 1e-3, tolerance 1e-3).
std::vector<GradcheckResult> check_layer_ops(std::uint64_t seed, int instances = 5);

/// Central difference of a function that is piecewise linear near x. Tries
/// steps h from h_max down to h_min (halving) until the one-sided slopes at
/// h and h/2 all agree within `slack` plus 1% of the central difference; nullopt when no step avoids a kink.
std::optional<double> piecewise_linear_difference(const std::function<double(float)>& f, float x, double h_max,
                                                  double h_min, double slack);

/// Desk-scale GlitchNet (64x32 input, channel scale 1/4) in inference mode:
/// gradient of the class-1 logit at 10 sampled input elements per instance,
/// skipping samples that sit next to a kink. The error is normalized by the
/// largest entry of the whole input gradient (tolerance 1e-2).
GradcheckResult check_glitchnet(std::uint64_t seed, int instances = 5);

GradcheckReport run_gradcheck(std::uint64_t seed, int instances = 5);

}  // namespace glitch
