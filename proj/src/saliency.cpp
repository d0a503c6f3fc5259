#include "glitch/saliency.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "glitch/errors.hpp"
#include "glitch/numerics/ops.hpp"

namespace glitch {
namespace {

// Inverse of rotate_clockwise for a float plane of the rotated size w x h.
std::vector<float> rotate_counter_clockwise(const std::vector<float>& plane, int w, int h) {
  // Rotated pixel (x, y) came from source (y, w - 1 - x); the source is h wide.
  std::vector<float> out(plane.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out[static_cast<std::size_t>(w - 1 - x) * h + y] = plane[static_cast<std::size_t>(y) * w + x];
  return out;
}

std::uint8_t blend(std::uint8_t a, std::uint8_t b, float alpha) {
  const float v = (1.0f - alpha) * static_cast<float>(a) + alpha * static_cast<float>(b);
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

SaliencyMap compute_saliency(const Detector& detector, const Tensor& input, std::optional<int> target_class) {
  Tape tape;
  const Var x = tape.variable(input);
  const Var z = detector.logits(x);
  const auto K = static_cast<int>(z.value().dim(1));
  int target = 0;
  if (target_class) {
    if (*target_class < 0 || *target_class >= K)
      throw std::out_of_range("saliency: class " + std::to_string(*target_class) + " outside [0, " +
                              std::to_string(K) + ")");
    target = *target_class;
  } else {
    for (int k = 1; k < K; ++k)
      if (z.value()[static_cast<std::size_t>(k)] > z.value()[static_cast<std::size_t>(target)]) target = k;
  }
  const Var score = nn::select_column(z, target);
  const Tensor grad = tape.backward(score).of(x);

  SaliencyMap map;
  map.height = static_cast<int>(input.dim(2));
  map.width = static_cast<int>(input.dim(3));
  map.target_class = target;
  map.target_logit = score.value().item();
  const std::size_t plane = static_cast<std::size_t>(map.width) * static_cast<std::size_t>(map.height);
  map.values.assign(plane, 0.0f);
  const auto g = grad.data();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t i = 0; i < plane; ++i) map.values[i] = std::max(map.values[i], std::fabs(g[c * plane + i]));
  const float peak = *std::max_element(map.values.begin(), map.values.end());
  map.normalized.resize(plane);
  for (std::size_t i = 0; i < plane; ++i) map.normalized[i] = peak > 0.0f ? map.values[i] / peak : 0.0f;
  return map;
}

SaliencyMap compute_saliency(const Detector& detector, const ImageRGB& image, std::optional<int> target_class) {
  return compute_saliency(detector, preprocess(image, detector.input_width(), detector.input_height()), target_class);
}

Rgb heat_color(float t) {
  static constexpr std::array<std::array<float, 3>, 5> kStops = {
      {{0, 0, 255}, {0, 255, 255}, {0, 255, 0}, {255, 255, 0}, {255, 0, 0}}};
  t = std::clamp(t, 0.0f, 1.0f);
  const float pos = t * 4.0f;
  const auto i = std::min<std::size_t>(3, static_cast<std::size_t>(pos));
  const float f = pos - static_cast<float>(i);
  auto ch = [&](std::size_t c) {
    return static_cast<std::uint8_t>(std::lround(kStops[i][c] + (kStops[i + 1][c] - kStops[i][c]) * f));
  };
  return {ch(0), ch(1), ch(2)};
}

ImageRGB heatmap_colors(const SaliencyMap& saliency) {
  ImageRGB out(saliency.width, saliency.height);
  for (int y = 0; y < saliency.height; ++y)
    for (int x = 0; x < saliency.width; ++x)
      out.set(x, y, heat_color(saliency.normalized[static_cast<std::size_t>(y) * saliency.width + x]));
  return out;
}

ImageRGB render_heatmap(const SaliencyMap& saliency, const ImageRGB& original, float alpha) {
  if (!(alpha >= 0.0f && alpha <= 1.0f)) throw std::invalid_argument("render_heatmap: alpha must be in [0, 1]");
  const bool portrait = original.height() > original.width();
  const int rw = portrait ? original.height() : original.width();
  const int rh = portrait ? original.width() : original.height();
  auto plane = resize_bilinear(saliency.normalized, saliency.width, saliency.height, rw, rh);
  if (portrait) plane = rotate_counter_clockwise(plane, rw, rh);
  ImageRGB out(original.width(), original.height());
  for (int y = 0; y < original.height(); ++y)
    for (int x = 0; x < original.width(); ++x) {
      const Rgb o = original.at(x, y);
      const Rgb h = heat_color(plane[static_cast<std::size_t>(y) * original.width() + x]);
      out.set(x, y, {blend(o.r, h.r, alpha), blend(o.g, h.g, alpha), blend(o.b, h.b, alpha)});
    }
  return out;
}

GlitchMask mask_to_model(const GlitchMask& mask, int width, int height) {
  const GlitchMask& upright = mask.height() > mask.width() ? rotate_clockwise(mask) : mask;
  return resize_nearest(upright, width, height);
}

double localization_score(const SaliencyMap& saliency, const GlitchMask& mask, double top_fraction) {
  if (!(top_fraction > 0.0 && top_fraction <= 1.0))
    throw std::invalid_argument("localization_score: top_fraction must be in (0, 1]");
  if (mask.empty()) throw std::invalid_argument("localization_score: mask is empty");
  const GlitchMask m = mask_to_model(mask, saliency.width, saliency.height);
  if (m.empty()) throw std::invalid_argument("localization_score: mask vanishes at model resolution");
  const std::size_t n = saliency.values.size();
  const auto k = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(top_fraction * static_cast<double>(n) - 1e-9)),
                                         1, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return saliency.values[a] > saliency.values[b]; });
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i) hits += m.bits()[order[i]] != 0;
  return static_cast<double>(hits) / static_cast<double>(k);
}

void write_saliency_raw(const std::filesystem::path& path, const SaliencyMap& saliency) {
  std::vector<char> bytes;
  bytes.reserve(saliency.values.size() * 4);
  for (const float v : saliency.values) {
    const auto u = std::bit_cast<std::uint32_t>(v);
    for (int s = 0; s < 32; s += 8) bytes.push_back(static_cast<char>((u >> s) & 0xff));
  }
  {
    std::ofstream out(path, std::ios::binary);
    if (!out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()))) throw IoError(path, "cannot write saliency");
  }
  const auto sidecar = std::filesystem::path(path.string() + ".json");
  std::ofstream meta(sidecar);
  meta << nlohmann::json{{"width", saliency.width},
                         {"height", saliency.height},
                         {"dtype", "float32"},
                         {"byte_order", "little"},
                         {"target_class", saliency.target_class}}
              .dump(2)
       << '\n';
  if (!meta) throw IoError(sidecar, "cannot write saliency sidecar");
}

}  // namespace glitch
