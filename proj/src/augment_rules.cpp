#include "glitch/augment_rules.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "glitch/errors.hpp"
#include "glitch/rng.hpp"

namespace glitch {
namespace {

constexpr std::array<std::string_view, 4> kRuleNames = {"partial_repetition", "solid_color_block", "mosaic",
                                                        "random_noise"};

struct AreaBounds {
  long min_area;
  long max_area;
};

AreaBounds area_bounds(const ImageRGB& img, double min_fraction, double max_fraction) {
  if (!(min_fraction > 0.0) || max_fraction < min_fraction || max_fraction > 1.0) {
    throw std::invalid_argument("region constraints: need 0 < min_fraction <= max_fraction <= 1");
  }
  const double total = static_cast<double>(img.width()) * img.height();
  const auto lo = std::max(1L, static_cast<long>(std::ceil(min_fraction * total - 1e-9)));
  const auto hi = static_cast<long>(std::floor(max_fraction * total + 1e-9));
  if (hi < lo) {
    throw std::invalid_argument("image " + std::to_string(img.width()) + "x" + std::to_string(img.height()) +
                                " is smaller than the minimum glitch region");
  }
  return {lo, hi};
}

// Random rectangle with area in [b.min_area, b.max_area] that fits the image.
Rect sample_rect(Rng& rng, int width, int height, AreaBounds b) {
  for (int attempt = 0; attempt < 64; ++attempt) {
    const long area = b.min_area + static_cast<long>(rng.below(static_cast<std::uint64_t>(b.max_area - b.min_area + 1)));
    const double aspect = std::exp(rng.uniform(std::log(1.0 / 3.0), std::log(3.0)));
    const int w = std::clamp(static_cast<int>(std::lround(std::sqrt(area * aspect))), 1, width);
    const int h = std::clamp(static_cast<int>(std::lround(static_cast<double>(area) / w)), 1, height);
    const long got = static_cast<long>(w) * h;
    if (got < b.min_area || got > b.max_area) continue;
    return {rng.uniform_int(0, width - w), rng.uniform_int(0, height - h), w, h};
  }
  // Deterministic fallback for awkward aspect ratios: widest feasible strip.
  for (int w = width; w >= 1; --w) {
    const int h = static_cast<int>((b.min_area + w - 1) / w);
    if (h <= height && static_cast<long>(w) * h <= b.max_area) {
      return {rng.uniform_int(0, width - w), rng.uniform_int(0, height - h), w, h};
    }
  }
  throw std::invalid_argument("no rectangle satisfies the region constraints");
}

void mark(GlitchMask& mask, const Rect& r) {
  for (int y = r.y; y < r.y + r.h; ++y)
    for (int x = r.x; x < r.x + r.w; ++x) mask.set(x, y);
}

}  // namespace

std::string_view to_string(Rule rule) { return kRuleNames[static_cast<std::size_t>(rule)]; }

Rule parse_rule(std::string_view name) {
  for (std::size_t i = 0; i < kRuleNames.size(); ++i)
    if (kRuleNames[i] == name) return static_cast<Rule>(i);
  throw SpecError("unknown rule '" + std::string(name) +
                  "' (expected partial_repetition, solid_color_block, mosaic or random_noise)");
}

GlitchClass glitch_class_for(Rule rule) {
  switch (rule) {
    case Rule::kPartialRepetition: return GlitchClass::kPartialRepetition;
    case Rule::kSolidColorBlock: return GlitchClass::kAbnormalColorBlock;
    case Rule::kMosaic: return GlitchClass::kAbnormalColorBlock;
    case Rule::kRandomNoise: return GlitchClass::kRandomNoise;
  }
  return GlitchClass::kAbnormalColorBlock;
}

AugmentResult apply_partial_repetition(const ImageRGB& image, std::uint64_t seed, const RegionConstraints& c) {
  const auto bounds = area_bounds(image, c.min_fraction, c.max_fraction);
  Rng rng(seed);
  AugmentResult out{image, GlitchMask(image.width(), image.height()), {}, {}, true, 0};
  out.horizontal = rng.below(2) == 0;
  const bool forward = rng.below(2) == 0;
  // Work in (along, across) coordinates; along is the tiling axis.
  const int along = out.horizontal ? image.width() : image.height();
  const int across = out.horizontal ? image.height() : image.width();
  if (along < 2) throw std::invalid_argument("partial repetition needs at least 2 pixels along the tiling axis");

  int length = 0, thickness = 0;
  for (int attempt = 0; attempt < 256 && length == 0; ++attempt) {
    const long area = bounds.min_area + static_cast<long>(rng.below(static_cast<std::uint64_t>(bounds.max_area - bounds.min_area + 1)));
    const int t_lo = static_cast<int>(std::max(1L, (area + along - 2) / (along - 1)));
    const int t_hi = static_cast<int>(std::min<long>(across, area));
    if (t_lo > t_hi) continue;
    const int t = rng.uniform_int(t_lo, t_hi);
    const int len = std::clamp(static_cast<int>(std::lround(static_cast<double>(area) / t)), 1, along - 1);
    const long got = static_cast<long>(len) * t;
    if (got >= bounds.min_area && got <= bounds.max_area) {
      length = len;
      thickness = t;
    }
  }
  if (length == 0) throw std::invalid_argument("image too small for partial repetition under the region constraints");

  const int room = along - length;
  const int src_lo = std::min(room, 4);
  const int src_hi = std::max(src_lo, std::min(room, std::max(length, 4)));
  const int src_len = rng.uniform_int(src_lo, src_hi);
  const int offset = rng.uniform_int(0, across - thickness);
  // Forward: source then tiles to the far border. Backward: tiles from the
  // near border, then source.
  const int src_start = forward ? along - length - src_len : length;
  const int tile_start = forward ? src_start + src_len : 0;

  auto to_xy = [&](int a, int b) { return out.horizontal ? std::pair{a, b} : std::pair{b, a}; };
  for (int b = offset; b < offset + thickness; ++b) {
    for (int a = tile_start; a < tile_start + length; ++a) {
      const int rel = ((a - src_start) % src_len + src_len) % src_len;
      const auto [sx, sy] = to_xy(src_start + rel, b);
      const auto [dx, dy] = to_xy(a, b);
      out.image.set(dx, dy, image.at(sx, sy));
      out.mask.set(dx, dy);
    }
  }
  if (out.horizontal) {
    out.regions = {{src_start, offset, src_len, thickness}, {tile_start, offset, length, thickness}};
  } else {
    out.regions = {{offset, src_start, thickness, src_len}, {offset, tile_start, thickness, length}};
  }
  return out;
}

AugmentResult apply_solid_color_block(const ImageRGB& image, std::uint64_t seed, PaletteMode palette,
                                      const RegionConstraints& c) {
  const auto bounds = area_bounds(image, c.min_fraction, c.max_fraction);
  Rng rng(seed);
  AugmentResult out{image, GlitchMask(image.width(), image.height()), {}, {}, true, 0};
  const int count = rng.uniform_int(3, 5);
  const AreaBounds per_block{bounds.min_area, std::max(bounds.min_area, bounds.max_area / count)};
  for (int i = 0; i < count; ++i) {
    const Rect r = sample_rect(rng, image.width(), image.height(), per_block);
    Rgb color;
    if (palette == PaletteMode::kFixedPalette) {
      color = kFixedPalette[rng.below(kFixedPalette.size())];
    } else {
      color = {rng.byte(), rng.byte(), rng.byte()};
    }
    for (int y = r.y; y < r.y + r.h; ++y)
      for (int x = r.x; x < r.x + r.w; ++x) out.image.set(x, y, color);
    mark(out.mask, r);
    out.regions.push_back(r);
    out.colors.push_back(color);
  }
  return out;
}

AugmentResult apply_mosaic(const ImageRGB& image, std::uint64_t seed, const RegionConstraints& c) {
  const auto bounds = area_bounds(image, c.min_fraction, c.max_fraction);
  if (c.min_patch < 2 || c.max_patch < c.min_patch) throw std::invalid_argument("mosaic: patch range must start at >= 2");
  Rng rng(seed);
  AugmentResult out{image, GlitchMask(image.width(), image.height()), {}, {}, true, 0};
  const Rect r = sample_rect(rng, image.width(), image.height(), bounds);
  const int fit = std::max(2, std::min(r.w, r.h));
  out.patch = rng.uniform_int(std::min(c.min_patch, fit), std::min(c.max_patch, std::max(c.min_patch, fit)));
  for (int py = r.y; py < r.y + r.h; py += out.patch) {
    const int ph = std::min(out.patch, r.y + r.h - py);
    for (int px = r.x; px < r.x + r.w; px += out.patch) {
      const int pw = std::min(out.patch, r.x + r.w - px);
      const Rgb center = image.at(px + pw / 2, py + ph / 2);
      for (int y = py; y < py + ph; ++y)
        for (int x = px; x < px + pw; ++x) out.image.set(x, y, center);
    }
  }
  mark(out.mask, r);
  out.regions.push_back(r);
  return out;
}

AugmentResult apply_random_noise(const ImageRGB& image, std::uint64_t seed, const RegionConstraints& c) {
  const auto bounds = area_bounds(image, c.min_fraction, c.max_fraction);
  Rng rng(seed);
  AugmentResult out{image, GlitchMask(image.width(), image.height()), {}, {}, true, 0};
  const Rect r = sample_rect(rng, image.width(), image.height(), bounds);
  for (int y = r.y; y < r.y + r.h; ++y)
    for (int x = r.x; x < r.x + r.w; ++x) out.image.set(x, y, {rng.byte(), rng.byte(), rng.byte()});
  mark(out.mask, r);
  out.regions.push_back(r);
  return out;
}

AugmentResult apply_rule(const ImageRGB& image, const RuleSpec& spec) {
  switch (spec.rule) {
    case Rule::kPartialRepetition: return apply_partial_repetition(image, spec.seed, spec.constraints);
    case Rule::kSolidColorBlock: return apply_solid_color_block(image, spec.seed, spec.palette, spec.constraints);
    case Rule::kMosaic: return apply_mosaic(image, spec.seed, spec.constraints);
    case Rule::kRandomNoise: return apply_random_noise(image, spec.seed, spec.constraints);
  }
  throw std::invalid_argument("apply_rule: unknown rule");
}

DatasetManifest generate_rule_dataset(const DatasetManifest& normals, std::span<const Rule> rules, PaletteMode palette,
                                      std::uint64_t seed, const std::filesystem::path& out_dir) {
  if (rules.empty()) throw SpecError("generate_rule_dataset: no rules requested");
  DatasetManifest originals = filter_manifest(normals, [](const ManifestRecord& r) { return r.label == Label::kNormal; });

  DatasetManifest generated;
  generated.base_dir = std::filesystem::absolute(out_dir).lexically_normal();
  const Generator gen = palette == PaletteMode::kFixedPalette ? Generator::kRuleF : Generator::kRuleR;
  for (std::size_t i = 0; i < originals.records.size(); ++i) {
    const auto& src = originals.records[i];
    const Rule rule = rules[i % rules.size()];
    const std::uint64_t image_seed = seed ^ mix64(i);
    const ImageRGB image = read_png(originals.resolve(src.image));
    const auto result = apply_rule(image, {rule, palette, image_seed, {}});

    std::ostringstream name;
    name << "rule_" << std::setw(5) << std::setfill('0') << i << '_' << to_string(rule) << ".png";
    const auto image_rel = "images/" + name.str();
    const auto mask_rel = "masks/" + name.str();
    write_png(generated.base_dir / image_rel, result.image);
    write_mask_png(generated.base_dir / mask_rel, result.mask);

    ManifestRecord rec;
    rec.image = image_rel;
    rec.label = Label::kGlitch;
    rec.glitch_class = glitch_class_for(rule);
    rec.mask = mask_rel;
    rec.generator = gen;
    rec.seed = image_seed;
    rec.provenance = {{"rule", to_string(rule)}, {"source", src.image}, {"dataset_seed", seed}};
    generated.records.push_back(std::move(rec));
  }

  const std::array<DatasetManifest, 2> parts = {originals, generated};
  DatasetManifest out = merge_manifests(parts, out_dir);
  write_manifest(out_dir / "manifest.jsonl", out);
  return out;
}

}  // namespace glitch
