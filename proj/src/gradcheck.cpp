#include "glitch/gradcheck.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "glitch/glitchnet.hpp"
#include "glitch/numerics/ops.hpp"
#include "glitch/rng.hpp"

namespace glitch {
namespace {

constexpr double kOpTolerance = 1e-3;
constexpr double kNetTolerance = 1e-2;

Tensor random_tensor(Rng& rng, Shape shape, double scale = 1.0) {
  std::vector<float> data(numel(shape));
  for (auto& v : data) v = static_cast<float>(rng.normal() * scale);
  return Tensor(std::move(shape), std::move(data));
}

// Random sign, magnitude in [lo, hi].
Tensor away_from_zero(Rng& rng, Shape shape, double lo = 0.05, double hi = 1.5) {
  std::vector<float> data(numel(shape));
  for (auto& v : data) {
    const double mag = rng.uniform(lo, hi);
    v = static_cast<float>(rng.below(2) == 0 ? -mag : mag);
  }
  return Tensor(std::move(shape), std::move(data));
}

// Distinct values spaced 0.05 apart in random order, so pooling windows
// have a unique max that survives a step of 1e-3.
Tensor distinct_values(Rng& rng, Shape shape) {
  const auto n = numel(shape);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<float> data(n);
  for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<float>(0.05 * static_cast<double>(order[i]) - 0.025 * n);
  return Tensor(std::move(shape), std::move(data));
}

double weighted_sum(const Tensor& y, const std::vector<double>& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * static_cast<double>(y[i]);
  return s;
}

Tensor with_element(const Tensor& t, std::size_t i, float value) {
  auto data = t.to_vector();
  data[i] = value;
  return Tensor(t.shape(), std::move(data));
}

struct Case {
  std::string name;
  std::function<std::vector<Tensor>(Rng&)> make_inputs;
  OpFn f;
};

std::vector<Case> layer_cases() {
  using namespace nn;
  std::vector<Case> cases;
  cases.push_back({"conv2d",
                   [](Rng& rng) {
                     return std::vector<Tensor>{random_tensor(rng, {2, 2, 5, 5}), random_tensor(rng, {3, 2, 3, 3}, 0.5),
                                                random_tensor(rng, {3}, 0.5)};
                   },
                   [](std::span<const Var> v) { return conv2d(v[0], v[1], v[2]); }});
  cases.push_back({"conv2d_stride2_pad0",
                   [](Rng& rng) {
                     return std::vector<Tensor>{random_tensor(rng, {1, 2, 7, 7}), random_tensor(rng, {2, 2, 3, 3}, 0.5),
                                                random_tensor(rng, {2}, 0.5)};
                   },
                   [](std::span<const Var> v) { return conv2d(v[0], v[1], v[2], {2, 0}); }});
  cases.push_back({"batchnorm2d_train",
                   [](Rng& rng) {
                     return std::vector<Tensor>{random_tensor(rng, {3, 2, 3, 3}), away_from_zero(rng, {2}, 0.5, 1.5),
                                                random_tensor(rng, {2})};
                   },
                   [](std::span<const Var> v) {
                     BatchNormStats stats{Tensor::zeros({2}), Tensor::full({2}, 1.0f)};
                     return batchnorm2d(v[0], v[1], v[2], stats, true);
                   }});
  cases.push_back({"batchnorm2d_eval",
                   [](Rng& rng) {
                     return std::vector<Tensor>{random_tensor(rng, {2, 2, 3, 3}), away_from_zero(rng, {2}, 0.5, 1.5),
                                                random_tensor(rng, {2})};
                   },
                   [](std::span<const Var> v) {
                     BatchNormStats stats{Tensor({2}, {0.3f, -0.2f}), Tensor({2}, {1.5f, 0.7f})};
                     return batchnorm2d(v[0], v[1], v[2], stats, false);
                   }});
  cases.push_back({"maxpool2d",
                   [](Rng& rng) { return std::vector<Tensor>{distinct_values(rng, {2, 2, 4, 6})}; },
                   [](std::span<const Var> v) { return maxpool2d(v[0], 2, 2); }});
  cases.push_back({"linear",
                   [](Rng& rng) {
                     return std::vector<Tensor>{random_tensor(rng, {3, 4}), random_tensor(rng, {5, 4}, 0.5),
                                                random_tensor(rng, {5}, 0.5)};
                   },
                   [](std::span<const Var> v) { return linear(v[0], v[1], v[2]); }});
  cases.push_back({"relu",
                   [](Rng& rng) { return std::vector<Tensor>{away_from_zero(rng, {3, 7})}; },
                   [](std::span<const Var> v) { return relu(v[0]); }});
  cases.push_back({"softmax",
                   [](Rng& rng) { return std::vector<Tensor>{random_tensor(rng, {3, 4})}; },
                   [](std::span<const Var> v) { return softmax(v[0]); }});
  cases.push_back({"cross_entropy",
                   [](Rng& rng) { return std::vector<Tensor>{random_tensor(rng, {4, 3})}; },
                   [](std::span<const Var> v) {
                     static constexpr int kLabels[] = {0, 2, 1, 2};
                     return cross_entropy(v[0], kLabels);
                   }});
  cases.push_back({"elementwise",
                   [](Rng& rng) {
                     return std::vector<Tensor>{random_tensor(rng, {2, 3}), random_tensor(rng, {2, 3}),
                                                random_tensor(rng, {2, 3})};
                   },
                   [](std::span<const Var> v) { return sub(mul(add(v[0], v[1]), v[2]), v[0]); }});
  cases.push_back({"flatten_sum_select",
                   [](Rng& rng) { return std::vector<Tensor>{random_tensor(rng, {2, 2, 1, 2})}; },
                   [](std::span<const Var> v) {
                     const Var f = flatten(v[0]);
                     return add(sum(f), select_column(f, 3));
                   }});
  return cases;
}

}  // namespace

bool GradcheckReport::passed() const {
  return std::all_of(results.begin(), results.end(), [](const GradcheckResult& r) { return r.passed(); });
}

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff = std::max(diff, std::fabs(analytic[i] - numeric[i]));
    na = std::max(na, std::fabs(analytic[i]));
    nn = std::max(nn, std::fabs(numeric[i]));
  }
  const double scale = std::max({na, nn, 1e-12});
  return diff / scale;
}

double gradient_rel_error(const OpFn& f, std::span<const Tensor> inputs, std::uint64_t seed, double h) {
  std::vector<Var> constants;
  for (const auto& t : inputs) constants.emplace_back(t);
  const Tensor y0 = f(constants).value();
  Rng rng(seed);
  std::vector<double> r(y0.size());
  for (auto& v : r) v = rng.uniform(-1.0, 1.0);

  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : inputs) vars.push_back(tape.variable(t));
  const Var y = f(vars);
  std::vector<float> rf(r.begin(), r.end());
  const Var loss = nn::sum(nn::mul(y, Var(Tensor(y.shape(), std::move(rf)))));
  const Gradients grads = tape.backward(loss);

  std::vector<double> analytic, numeric;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor g = grads.of(vars[k]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      analytic.push_back(g[i]);
      std::vector<Var> plus = constants, minus = constants;
      const float x = inputs[k][i];
      plus[k] = Var(with_element(inputs[k], i, static_cast<float>(x + h)));
      minus[k] = Var(with_element(inputs[k], i, static_cast<float>(x - h)));
      const double step = static_cast<double>(static_cast<float>(x + h)) - static_cast<double>(static_cast<float>(x - h));
      numeric.push_back((weighted_sum(f(plus).value(), r) - weighted_sum(f(minus).value(), r)) / step);
    }
  }
  return relative_error(analytic, numeric);
}

std::vector<GradcheckResult> check_layer_ops(std::uint64_t seed, int instances) {
  std::vector<GradcheckResult> out;
  for (const auto& c : layer_cases()) {
    GradcheckResult res{c.name, instances, 0.0, kOpTolerance};
    for (int i = 0; i < instances; ++i) {
      const auto s = derive_seed(seed, c.name + "#" + std::to_string(i));
      Rng rng(s);
      const auto inputs = c.make_inputs(rng);
      res.max_rel_error = std::max(res.max_rel_error, gradient_rel_error(c.f, inputs, mix64(s)));
    }
    out.push_back(res);
  }
  return out;
}

std::optional<double> piecewise_linear_difference(const std::function<double(float)>& f, float x, double h_max,
                                                  double h_min, double slack) {
  // In inference mode the network is piecewise linear in its input, so the
  // central difference is exact inside one linear piece. A kink within the
  // step shows up as one-sided slopes (at h and h/2) that disagree.
  const double f0 = f(x);
  auto slopes = [&](double h) {
    const float xp = static_cast<float>(x + h), xm = static_cast<float>(x - h);
    const double fp = f(xp), fm = f(xm);
    return std::array<double, 3>{(fp - f0) / (static_cast<double>(xp) - x), (f0 - fm) / (x - static_cast<double>(xm)),
                                 (fp - fm) / (static_cast<double>(xp) - static_cast<double>(xm))};
  };
  auto outer = slopes(h_max);
  for (double h = h_max; h >= h_min; h *= 0.5) {
    const auto inner = slopes(h * 0.5);
    const auto [lo, hi] = std::minmax({outer[0], outer[1], inner[0], inner[1]});
    if (hi - lo <= slack + 0.01 * std::fabs(outer[2])) return outer[2];
    outer = inner;
  }
  return std::nullopt;
}

GradcheckResult check_glitchnet(std::uint64_t seed, int instances) {
  GradcheckResult res{"glitchnet_input", instances, 0.0, kNetTolerance};
  const ModelConfig cfg = ModelConfig::desk_scale();
  constexpr int kSamples = 10;
  for (int i = 0; i < instances; ++i) {
    const auto s = derive_seed(seed, "glitchnet#" + std::to_string(i));
    const GlitchNet net(cfg, derive_seed(s, "weights"));
    Rng rng(derive_seed(s, "input"));
    const Shape shape{1, 3, static_cast<std::size_t>(cfg.input_height), static_cast<std::size_t>(cfg.input_width)};
    std::vector<float> data(numel(shape));
    for (auto& v : data) v = static_cast<float>(rng.uniform01());
    const Tensor input(shape, std::move(data));

    Tape tape;
    const Var x = tape.variable(input);
    const Tensor g = tape.backward(nn::select_column(net.logits(x), 1)).of(x);
    double scale = 0.0;
    for (const float v : g.data()) scale = std::max(scale, std::fabs(static_cast<double>(v)));

    std::vector<double> analytic, numeric;
    for (int attempt = 0; attempt < 200 * kSamples && static_cast<int>(analytic.size()) < kSamples; ++attempt) {
      const auto idx = static_cast<std::size_t>(rng.below(input.size()));
      const auto logit = [&](float v) { return static_cast<double>(net.logits(Var(with_element(input, idx, v))).value()[1]); };
      const auto d = piecewise_linear_difference(logit, input[idx], 2.5e-2, 5e-3, 0.002 * scale);
      if (!d) continue;  // kink next to the sample point
      analytic.push_back(g[idx]);
      numeric.push_back(*d);
    }
    if (static_cast<int>(analytic.size()) < kSamples) {
      res.max_rel_error = std::numeric_limits<double>::infinity();
      continue;
    }
    // Normalized by the largest input-gradient entry, not just the sampled ones.
    double diff = 0.0, nmax = 0.0;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
      diff = std::max(diff, std::fabs(analytic[k] - numeric[k]));
      nmax = std::max(nmax, std::fabs(numeric[k]));
    }
    res.max_rel_error = std::max(res.max_rel_error, diff / std::max({scale, nmax, 1e-12}));
  }
  return res;
}

GradcheckReport run_gradcheck(std::uint64_t seed, int instances) {
  GradcheckReport report;
  report.results = check_layer_ops(seed, instances);
  report.results.push_back(check_glitchnet(seed, instances));
  return report;
}

}  // namespace glitch
