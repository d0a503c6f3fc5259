#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "glitch/glitchnet.hpp"
#include "glitch/image.hpp"

namespace glitch {

/// Per-pixel input-gradient magnitude at model resolution.
struct SaliencyMap {
  int width = 0;
  int height = 0;
  /// max over RGB of |d logit / d pixel|, row-major.
  std::vector<float> values;
  /// values / max(values), or all zeros when every value is zero.
  std::vector<float> normalized;
  int target_class = 0;
  float target_logit = 0.0f;
};

/// Backpropagates the pre-softmax logit of target_class (default: the
/// predicted class, ties to class 0) to the preprocessed input. Throws
/// std::out_of_range for an invalid class.
SaliencyMap compute_saliency(const Detector& detector, const ImageRGB& image, std::optional<int> target_class = {});

/// Same, on an already preprocessed [1,3,H,W] input.
SaliencyMap compute_saliency(const Detector& detector, const Tensor& input, std::optional<int> target_class = {});

/// Color ramp blue -> cyan -> green -> yellow -> red over t in [0, 1].
Rgb heat_color(float t);

/// Normalized saliency mapped through heat_color at model resolution.
ImageRGB heatmap_colors(const SaliencyMap& saliency);

/// Heatmap resized to the original image (undoing the portrait rotation
/// applied by preprocess) and blended as (1 - alpha) * original + alpha * heat.
ImageRGB render_heatmap(const SaliencyMap& saliency, const ImageRGB& original, float alpha = 0.5f);

/// Fraction of the ceil(top_fraction * N) most salient pixels that fall in
/// the mask. Ties keep scan order. The mask is brought to model resolution
/// the way preprocess treats images (rotation, then nearest neighbour).
/// Throws std::invalid_argument for an empty mask or top_fraction outside (0, 1].
double localization_score(const SaliencyMap& saliency, const GlitchMask& mask, double top_fraction);

/// Mask at saliency resolution, as used by localization_score.
GlitchMask mask_to_model(const GlitchMask& mask, int width, int height);

/// Raw values as little-endian float32, plus `<path>.json` with the dims.
void write_saliency_raw(const std::filesystem::path& path, const SaliencyMap& saliency);

}  // namespace glitch
