#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "glitch/image.hpp"
#include "glitch/manifest.hpp"

namespace glitch {

enum class Rule { kPartialRepetition, kSolidColorBlock, kMosaic, kRandomNoise };

/// Rule(R) draws block colors uniformly from RGB; Rule(F) from kFixedPalette.
enum class PaletteMode { kRandomRgb, kFixedPalette };

/// red, black, pink (web "hotpink"), cyan.
inline constexpr std::array<Rgb, 4> kFixedPalette = {
    Rgb{255, 0, 0}, Rgb{0, 0, 0}, Rgb{255, 105, 180}, Rgb{0, 255, 255}};

/// Bounds on the glitch area as fractions of the image area, and the
/// mosaic patch edge range in pixels.
struct RegionConstraints {
  double min_fraction = 0.02;
  double max_fraction = 0.25;
  int min_patch = 4;
  int max_patch = 32;
};

struct RuleSpec {
  Rule rule = Rule::kRandomNoise;
  PaletteMode palette = PaletteMode::kRandomRgb;
  std::uint64_t seed = 0;
  RegionConstraints constraints{};
};

struct AugmentResult {
  ImageRGB image;
  GlitchMask mask;
  /// Rectangles in painting order. Partial repetition: {source, tiled span};
  /// solid blocks: one per block; mosaic / noise: the affected rectangle.
  std::vector<Rect> regions;
  /// Block colors (solid color rule only), parallel to regions.
  std::vector<Rgb> colors;
  /// Partial repetition: true when tiles run along x.
  bool horizontal = true;
  /// Mosaic patch edge.
  int patch = 0;
};

std::string_view to_string(Rule rule);
Rule parse_rule(std::string_view name);
GlitchClass glitch_class_for(Rule rule);

/// Copies a random source rectangle repeatedly along one axis up to the
/// image border. The mask covers the tiled span (source excluded), whose
/// area obeys the constraints.
AugmentResult apply_partial_repetition(const ImageRGB& image, std::uint64_t seed, const RegionConstraints& c = {});

/// Paints 3..5 solid rectangles one after another. Each block's area lies in
/// [min, max / count] of the image so the union respects the constraints.
AugmentResult apply_solid_color_block(const ImageRGB& image, std::uint64_t seed, PaletteMode palette,
                                      const RegionConstraints& c = {});

/// Splits a rectangle into square patches (edge clipped at the rectangle
/// border) and fills each with the original color of its center pixel.
AugmentResult apply_mosaic(const ImageRGB& image, std::uint64_t seed, const RegionConstraints& c = {});

/// Replaces a rectangle with independent uniform RGB noise.
AugmentResult apply_random_noise(const ImageRGB& image, std::uint64_t seed, const RegionConstraints& c = {});

AugmentResult apply_rule(const ImageRGB& image, const RuleSpec& spec);

/// Applies rules round-robin to the normal records of `normals`, one rule
/// per image, with per-image seed = seed ^ mix64(index). Writes
/// images/ and masks/ under out_dir plus out_dir/manifest.jsonl, which lists
/// the originals (normal) followed by the generated glitch entries.
DatasetManifest generate_rule_dataset(const DatasetManifest& normals, std::span<const Rule> rules, PaletteMode palette,
                                      std::uint64_t seed, const std::filesystem::path& out_dir);

}  // namespace glitch
