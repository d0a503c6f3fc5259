#include "glitch/rendersim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "glitch/errors.hpp"
#include "glitch/rng.hpp"

namespace glitch::render {
namespace {

template <typename... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <typename... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::uint8_t lerp_u8(int a, int b, int num, int den) {
  // Rounded integer interpolation a + (b - a) * num / den.
  if (den == 0) return static_cast<std::uint8_t>(a);
  const int v = a * den + (b - a) * num;
  return static_cast<std::uint8_t>((v + den / 2) / den);
}

Rgb lerp(Rgb a, Rgb b, int num, int den) {
  return {lerp_u8(a.r, b.r, num, den), lerp_u8(a.g, b.g, num, den), lerp_u8(a.b, b.b, num, den)};
}

int wrap_coord(int v, int extent, int size) {
  const int period = extent + size;
  return ((v + size) % period + period) % period - size;
}

Rect intersect(const Rect& a, const Rect& b) {
  const int x0 = std::max(a.x, b.x), y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.x + a.w, b.x + b.w), y1 = std::min(a.y + a.h, b.y + b.h);
  return {x0, y0, std::max(0, x1 - x0), std::max(0, y1 - y0)};
}

std::uint8_t lattice_level(std::uint64_t seed, int i, int j) {
  const auto key = seed ^ mix64(static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) |
                                (static_cast<std::uint64_t>(static_cast<std::uint32_t>(j)) << 32));
  return static_cast<std::uint8_t>(mix64(key) >> 56);
}

Rgb hashed_color(std::uint64_t seed, int i, int j) {
  const auto h = mix64(seed ^ mix64(static_cast<std::uint64_t>(static_cast<std::uint32_t>(i)) |
                                    (static_cast<std::uint64_t>(static_cast<std::uint32_t>(j)) << 32)));
  return {static_cast<std::uint8_t>(h >> 56), static_cast<std::uint8_t>(h >> 48), static_cast<std::uint8_t>(h >> 40)};
}

std::uint64_t drawable_seed(std::uint64_t scene_seed, std::size_t layer, std::size_t index) {
  return derive_seed(derive_seed(scene_seed, "drawable"), (static_cast<std::uint64_t>(layer) << 32) | index);
}

// Calls plot(x, y, color) for every opaque pixel of the drawable at frame t,
// clipped to clip.
template <typename Plot>
void rasterize(const DrawableSpec& d, std::uint64_t seed, int t, const Rect& clip, int canvas_w, int canvas_h,
               Plot&& plot) {
  const int w = d.width(), h = d.height();
  int ox = d.x + d.velocity.dx * t;
  int oy = d.y + d.velocity.dy * t;
  if (d.wrap) {
    ox = wrap_coord(ox, canvas_w, w);
    oy = wrap_coord(oy, canvas_h, h);
  }
  const Rect area = intersect({ox, oy, w, h}, clip);
  for (int y = area.y; y < area.y + area.h; ++y) {
    const int ly = y - oy;
    for (int x = area.x; x < area.x + area.w; ++x) {
      const int lx = x - ox;
      std::visit(Overloaded{
                     [&](const RectShape& s) { plot(x, y, s.color); },
                     [&](const GradientShape& s) {
                       plot(x, y, s.vertical ? lerp(s.from, s.to, ly, h - 1) : lerp(s.from, s.to, lx, w - 1));
                     },
                     [&](const CheckerShape& s) { plot(x, y, ((lx / s.cell + ly / s.cell) % 2) ? s.b : s.a); },
                     [&](const NoiseShape& s) {
                       const int i = lx / s.cell, j = ly / s.cell, fx = lx % s.cell, fy = ly % s.cell;
                       const int c = s.cell;
                       const int sum = lattice_level(seed, i, j) * (c - fx) * (c - fy) +
                                       lattice_level(seed, i + 1, j) * fx * (c - fy) +
                                       lattice_level(seed, i, j + 1) * (c - fx) * fy +
                                       lattice_level(seed, i + 1, j + 1) * fx * fy;
                       const int level = (sum + c * c / 2) / (c * c);
                       plot(x, y, lerp(s.a, s.b, level, 255));
                     },
                     [&](const SpriteShape& s) {
                       const char ch = s.rows[static_cast<std::size_t>(ly / s.scale)][static_cast<std::size_t>(lx / s.scale)];
                       if (ch != '.') plot(x, y, s.palette[static_cast<std::size_t>(ch - '0')]);
                     },
                 },
                 d.shape);
    }
  }
}

void fill_sky(ImageRGB& img, GlitchMask& cov, const Rect& vp, Rgb top) {
  const Rgb bottom{static_cast<std::uint8_t>((top.r + 255) / 2), static_cast<std::uint8_t>((top.g + 255) / 2),
                   static_cast<std::uint8_t>((top.b + 255) / 2)};
  for (int y = vp.y; y < vp.y + vp.h; ++y) {
    const Rgb c = lerp(top, bottom, y - vp.y, vp.h - 1);
    for (int x = vp.x; x < vp.x + vp.w; ++x) {
      img.set(x, y, c);
      cov.set(x, y);
    }
  }
}

void fill_solid(ImageRGB& img, GlitchMask& cov, const Rect& vp, Rgb c) {
  for (int y = vp.y; y < vp.y + vp.h; ++y)
    for (int x = vp.x; x < vp.x + vp.w; ++x) {
      img.set(x, y, c);
      cov.set(x, y);
    }
}

std::vector<int> draw_order(const CameraSpec& cam) {
  std::vector<int> order = cam.layers;
  std::sort(order.begin(), order.end());
  order.erase(std::unique(order.begin(), order.end()), order.end());
  return order;
}

void draw_layers(const SceneSpec& scene, const CameraSpec& cam, const Rect& vp, int t, ImageRGB& img, GlitchMask& cov) {
  for (const int layer : draw_order(cam)) {
    const auto& drawables = scene.layers[static_cast<std::size_t>(layer)];
    for (std::size_t i = 0; i < drawables.size(); ++i) {
      rasterize(drawables[i], drawable_seed(scene.seed, static_cast<std::size_t>(layer), i), t, vp, scene.width,
                scene.height, [&](int x, int y, Rgb c) {
                  img.set(x, y, c);
                  cov.set(x, y);
                });
    }
  }
}

void write_garbage(const SceneSpec& scene, const FaultSpec& fault, const GlitchMask& region, ImageRGB& img,
                   GlitchMask& cov) {
  const auto seed = derive_seed(scene.seed, "garbage:" + std::to_string(fault.camera));
  Rng rng(seed);
  // Block sizes are 8..64 px on a 256-px-tall canvas, scaled to the canvas
  // and capped at a third of the region's shorter side.
  int x0 = scene.width, y0 = scene.height, x1 = -1, y1 = -1;
  for (int y = 0; y < scene.height; ++y)
    for (int x = 0; x < scene.width; ++x)
      if (region.at(x, y)) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  const double scale = scene.height / 256.0;
  const int lo = std::max(2, static_cast<int>(std::lround(8 * scale)));
  int hi = std::max(lo, static_cast<int>(std::lround(64 * scale)));
  if (x1 >= 0) hi = std::clamp(std::min(x1 - x0 + 1, y1 - y0 + 1) / 3, lo, hi);
  const int block = rng.uniform_int(lo, hi);
  for (int y = 0; y < scene.height; ++y)
    for (int x = 0; x < scene.width; ++x) {
      if (!region.at(x, y)) continue;
      const Rgb c = fault.texture == GarbageTexture::kBlocks ? hashed_color(seed, x / block, y / block)
                                                             : hashed_color(seed, x, y);
      img.set(x, y, c);
      cov.set(x, y);
    }
}

[[noreturn]] void spec_fail(const std::string& field, const std::string& what) { throw SpecError(field + ": " + what); }

}  // namespace

int DrawableSpec::width() const {
  if (const auto* s = std::get_if<SpriteShape>(&shape))
    return s->rows.empty() ? 0 : static_cast<int>(s->rows.front().size()) * s->scale;
  return w;
}

int DrawableSpec::height() const {
  if (const auto* s = std::get_if<SpriteShape>(&shape)) return static_cast<int>(s->rows.size()) * s->scale;
  return h;
}

std::string_view to_string(ClearFlag flag) {
  switch (flag) {
    case ClearFlag::kSkyBox: return "SkyBox";
    case ClearFlag::kSolidColor: return "SolidColor";
    case ClearFlag::kDepthOnly: return "DepthOnly";
    case ClearFlag::kNothing: return "Nothing";
  }
  return "?";
}

std::string_view to_string(PostEffectKind kind) {
  switch (kind) {
    case PostEffectKind::kMirrorVertical: return "mirror_vertical";
    case PostEffectKind::kMirrorHorizontal: return "mirror_horizontal";
    case PostEffectKind::kOverexpose: return "overexpose";
  }
  return "?";
}

std::string_view to_string(FaultType type) {
  switch (type) {
    case FaultType::kCameraDisabled: return "camera_disabled";
    case FaultType::kClearFlagOverride: return "clearflag_override";
    case FaultType::kStalePostEffect: return "stale_post_effect";
    case FaultType::kLetterbox: return "letterbox";
  }
  return "?";
}

std::string_view to_string(GarbageTexture texture) {
  return texture == GarbageTexture::kBlocks ? "blocks" : "noise";
}

void SceneSpec::validate() const {
  if (width < 1 || height < 1) spec_fail("width/height", "canvas must be at least 1x1");
  if (frame_count < 1) spec_fail("frame_count", "must be >= 1");
  if (cameras.empty()) spec_fail("cameras", "at least one camera is required");
  const Rect canvas{0, 0, width, height};
  for (std::size_t l = 0; l < layers.size(); ++l) {
    for (std::size_t i = 0; i < layers[l].size(); ++i) {
      const auto& d = layers[l][i];
      const std::string field = "layers[" + std::to_string(l) + "][" + std::to_string(i) + "]";
      if (const auto* s = std::get_if<SpriteShape>(&d.shape)) {
        if (s->scale < 1) spec_fail(field + ".scale", "must be >= 1");
        if (s->rows.empty() || s->rows.front().empty()) spec_fail(field + ".rows", "sprite bitmap is empty");
        for (const auto& row : s->rows) {
          if (row.size() != s->rows.front().size()) spec_fail(field + ".rows", "rows differ in length");
          for (const char ch : row) {
            if (ch == '.') continue;
            if (ch < '0' || ch > '9' || static_cast<std::size_t>(ch - '0') >= s->palette.size())
              spec_fail(field + ".rows", std::string("pixel '") + ch + "' is not '.' or a palette index");
          }
        }
      } else if (d.w < 1 || d.h < 1) {
        spec_fail(field, "w and h must be >= 1");
      }
      if (const auto* s = std::get_if<CheckerShape>(&d.shape); s && s->cell < 1) spec_fail(field + ".cell", "must be >= 1");
      if (const auto* s = std::get_if<NoiseShape>(&d.shape); s && s->cell < 1) spec_fail(field + ".cell", "must be >= 1");
    }
  }
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    const auto& cam = cameras[c];
    const std::string field = "cameras[" + std::to_string(c) + "]";
    if (cam.layers.empty()) spec_fail(field + ".layers", "layer mask must not be empty");
    for (const int l : cam.layers)
      if (l < 0 || static_cast<std::size_t>(l) >= layers.size())
        spec_fail(field + ".layers", "layer " + std::to_string(l) + " does not exist");
    if (cam.viewport) {
      const auto& v = *cam.viewport;
      if (v.w < 1 || v.h < 1 || !(intersect(v, canvas) == v)) spec_fail(field + ".viewport", "must lie inside the canvas");
    }
    for (const auto& e : cam.post_effects)
      if (e.kind == PostEffectKind::kOverexpose && !(e.gain > 0.0)) spec_fail(field + ".post_effects", "gain must be > 0");
  }
}

Rect SceneSpec::camera_viewport(std::size_t camera) const {
  const auto& v = cameras.at(camera).viewport;
  return v ? *v : Rect{0, 0, width, height};
}

void FaultSpec::validate(const SceneSpec& scene) const {
  if (type != FaultType::kLetterbox && (camera < 0 || static_cast<std::size_t>(camera) >= scene.cameras.size()))
    spec_fail("faults.camera", "camera " + std::to_string(camera) + " does not exist");
  if (onset < 0 || onset >= scene.frame_count)
    spec_fail("faults.onset", "onset frame " + std::to_string(onset) + " is outside 0.." +
                                  std::to_string(scene.frame_count - 1));
  if (type == FaultType::kStalePostEffect && effect.kind == PostEffectKind::kOverexpose && !(effect.gain > 0.0))
    spec_fail("faults.gain", "must be > 0");
  if (type == FaultType::kLetterbox && (bars < 1 || 2 * bars >= scene.height))
    spec_fail("faults.bars", "bar height must be in 1.." + std::to_string((scene.height - 1) / 2));
}

GlitchClass FaultSpec::glitch_class() const {
  switch (type) {
    case FaultType::kCameraDisabled:
      return texture == GarbageTexture::kBlocks ? GlitchClass::kAbnormalColorBlock : GlitchClass::kRandomNoise;
    case FaultType::kClearFlagOverride:
      return (clear_flag == ClearFlag::kNothing || clear_flag == ClearFlag::kDepthOnly) ? GlitchClass::kFrameOverlay
                                                                                         : GlitchClass::kAbnormalColorBlock;
    case FaultType::kStalePostEffect:
      return effect.kind == PostEffectKind::kOverexpose ? GlitchClass::kOverexposed : GlitchClass::kPartialRepetition;
    case FaultType::kLetterbox: return GlitchClass::kBlackBorder;
  }
  return GlitchClass::kAbnormalColorBlock;
}

void apply_post_effect(ImageRGB& image, const Rect& vp, const PostEffect& effect) {
  switch (effect.kind) {
    case PostEffectKind::kMirrorVertical:
      for (int y = 0; y < vp.h / 2; ++y)
        for (int x = vp.x; x < vp.x + vp.w; ++x) {
          const Rgb a = image.at(x, vp.y + y);
          image.set(x, vp.y + y, image.at(x, vp.y + vp.h - 1 - y));
          image.set(x, vp.y + vp.h - 1 - y, a);
        }
      break;
    case PostEffectKind::kMirrorHorizontal:
      for (int y = vp.y; y < vp.y + vp.h; ++y)
        for (int x = 0; x < vp.w / 2; ++x) {
          const Rgb a = image.at(vp.x + x, y);
          image.set(vp.x + x, y, image.at(vp.x + vp.w - 1 - x, y));
          image.set(vp.x + vp.w - 1 - x, y, a);
        }
      break;
    case PostEffectKind::kOverexpose: {
      auto boost = [&](std::uint8_t v) {
        return static_cast<std::uint8_t>(std::min(255L, std::lround(static_cast<double>(v) * effect.gain)));
      };
      for (int y = vp.y; y < vp.y + vp.h; ++y)
        for (int x = vp.x; x < vp.x + vp.w; ++x) {
          const Rgb c = image.at(x, y);
          image.set(x, y, {boost(c.r), boost(c.g), boost(c.b)});
        }
      break;
    }
  }
}

FrameOutput render_frame(const SceneSpec& scene, int t, const ImageRGB& previous, const FaultSpec* fault) {
  FrameOutput out{previous.empty() ? ImageRGB(scene.width, scene.height) : previous,
                  GlitchMask(scene.width, scene.height)};
  if (out.image.width() != scene.width || out.image.height() != scene.height)
    throw std::invalid_argument("render_frame: previous frame has the wrong size");
  const bool active = fault != nullptr && t >= fault->onset;

  for (std::size_t c = 0; c < scene.cameras.size(); ++c) {
    CameraSpec cam = scene.cameras[c];
    const Rect vp = scene.camera_viewport(c);
    const bool targeted = active && static_cast<std::size_t>(fault->camera) == c;
    if (targeted && fault->type == FaultType::kClearFlagOverride) cam.clear_flag = fault->clear_flag;
    if (targeted && fault->type == FaultType::kStalePostEffect) cam.post_effects.push_back(fault->effect);

    if (targeted && fault->type == FaultType::kCameraDisabled) {
      if (!cam.enabled) continue;
      GlitchMask region(scene.width, scene.height);
      if (cam.clear_flag == ClearFlag::kSkyBox || cam.clear_flag == ClearFlag::kSolidColor) {
        for (int y = vp.y; y < vp.y + vp.h; ++y)
          for (int x = vp.x; x < vp.x + vp.w; ++x) region.set(x, y);
      } else {
        ImageRGB scratch(scene.width, scene.height);
        draw_layers(scene, cam, vp, t, scratch, region);
      }
      write_garbage(scene, *fault, region, out.image, out.coverage);
      continue;
    }
    if (!cam.enabled) continue;

    if (cam.clear_flag == ClearFlag::kSkyBox) fill_sky(out.image, out.coverage, vp, cam.clear_color);
    if (cam.clear_flag == ClearFlag::kSolidColor) fill_solid(out.image, out.coverage, vp, cam.clear_color);
    draw_layers(scene, cam, vp, t, out.image, out.coverage);
    for (const auto& e : cam.post_effects) {
      apply_post_effect(out.image, vp, e);
      for (int y = vp.y; y < vp.y + vp.h; ++y)
        for (int x = vp.x; x < vp.x + vp.w; ++x) out.coverage.set(x, y);
    }
  }

  if (active && fault->type == FaultType::kLetterbox) {
    fill_solid(out.image, out.coverage, {0, 0, scene.width, fault->bars}, {});
    fill_solid(out.image, out.coverage, {0, scene.height - fault->bars, scene.width, fault->bars}, {});
  }
  return out;
}

std::vector<ImageRGB> render_scene(const SceneSpec& scene) {
  scene.validate();
  std::vector<ImageRGB> frames;
  frames.reserve(static_cast<std::size_t>(scene.frame_count));
  ImageRGB screen;
  for (int t = 0; t < scene.frame_count; ++t) {
    screen = render_frame(scene, t, screen).image;
    frames.push_back(screen);
  }
  return frames;
}

FaultedRender render_with_fault(const SceneSpec& scene, const FaultSpec& fault) {
  scene.validate();
  fault.validate(scene);
  const auto clean = render_scene(scene);
  FaultedRender out{{}, {}, fault.glitch_class()};
  ImageRGB screen;
  for (int t = 0; t < scene.frame_count; ++t) {
    screen = render_frame(scene, t, screen, &fault).image;
    GlitchMask mask(scene.width, scene.height);
    const auto& ref = clean[static_cast<std::size_t>(t)];
    for (int y = 0; y < scene.height; ++y)
      for (int x = 0; x < scene.width; ++x)
        if (!(screen.at(x, y) == ref.at(x, y))) mask.set(x, y);
    out.frames.push_back(screen);
    out.masks.push_back(std::move(mask));
  }
  return out;
}

std::uint64_t scene_seed(std::uint64_t seed, std::size_t scene_index, std::uint64_t own_seed) {
  return derive_seed(derive_seed(seed, own_seed), static_cast<std::uint64_t>(scene_index));
}

DatasetManifest generate_injection_dataset(std::span<const SceneSpec> scenes,
                                           std::span<const std::vector<FaultSpec>> faults, std::uint64_t seed,
                                           const std::filesystem::path& out_dir) {
  if (faults.size() != scenes.size()) throw SpecError("generate_injection_dataset: one fault list per scene is required");
  DatasetManifest manifest;
  manifest.base_dir = std::filesystem::absolute(out_dir).lexically_normal();
  char buf[64];
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    SceneSpec scene = scenes[i];
    scene.seed = scene_seed(seed, i, scenes[i].seed);
    for (const auto& f : faults[i]) f.validate(scene);
    const auto frames = render_scene(scene);
    std::snprintf(buf, sizeof buf, "%03zu_", i);
    const std::string dir = std::string(buf) + scene.name;

    for (int t = 0; t < scene.frame_count; ++t) {
      std::snprintf(buf, sizeof buf, "/normal_%04d.png", t);
      const std::string rel = "frames/" + dir + buf;
      write_png(manifest.base_dir / rel, frames[static_cast<std::size_t>(t)]);
      ManifestRecord rec;
      rec.image = rel;
      rec.label = Label::kNormal;
      rec.generator = Generator::kInjection;
      rec.seed = scene.seed;
      rec.provenance = {{"scene", scene.name}, {"scene_index", i}, {"frame", t}, {"dataset_seed", seed}};
      manifest.records.push_back(std::move(rec));
    }

    for (std::size_t k = 0; k < faults[i].size(); ++k) {
      const auto& fault = faults[i][k];
      const auto faulted = render_with_fault(scene, fault);
      for (int t = fault.onset; t < scene.frame_count; ++t) {
        const auto& mask = faulted.masks[static_cast<std::size_t>(t)];
        if (mask.empty()) continue;
        std::snprintf(buf, sizeof buf, "/fault%02zu_%04d.png", k, t);
        const std::string image_rel = "frames/" + dir + buf;
        const std::string mask_rel = "masks/" + dir + buf;
        write_png(manifest.base_dir / image_rel, faulted.frames[static_cast<std::size_t>(t)]);
        write_mask_png(manifest.base_dir / mask_rel, mask);
        nlohmann::json fj = {{"type", to_string(fault.type)}, {"camera", fault.camera}, {"onset", fault.onset}};
        if (fault.type == FaultType::kClearFlagOverride) fj["value"] = to_string(fault.clear_flag);
        if (fault.type == FaultType::kStalePostEffect) {
          fj["effect"] = to_string(fault.effect.kind);
          if (fault.effect.kind == PostEffectKind::kOverexpose) fj["gain"] = fault.effect.gain;
        }
        if (fault.type == FaultType::kCameraDisabled) fj["texture"] = to_string(fault.texture);
        if (fault.type == FaultType::kLetterbox) fj["bars"] = fault.bars;
        ManifestRecord rec;
        rec.image = image_rel;
        rec.label = Label::kGlitch;
        rec.glitch_class = faulted.glitch_class;
        rec.mask = mask_rel;
        rec.generator = Generator::kInjection;
        rec.seed = scene.seed;
        rec.provenance = {{"scene", scene.name}, {"scene_index", i}, {"frame", t}, {"fault", fj}, {"dataset_seed", seed}};
        manifest.records.push_back(std::move(rec));
      }
    }
  }
  write_manifest(out_dir / "manifest.jsonl", manifest);
  return manifest;
}

namespace {

Rgb random_color(Rng& rng, int lo, int hi) {
  return {static_cast<std::uint8_t>(rng.uniform_int(lo, hi)), static_cast<std::uint8_t>(rng.uniform_int(lo, hi)),
          static_cast<std::uint8_t>(rng.uniform_int(lo, hi))};
}

SpriteShape random_sprite(Rng& rng, int size, int scale) {
  SpriteShape s;
  s.scale = scale;
  s.palette = {random_color(rng, 60, 255), random_color(rng, 200, 255), random_color(rng, 10, 50)};
  // Left-right symmetric blob: body color, dark rim, two light eyes.
  const double cx = (size - 1) / 2.0, cy = (size - 1) / 2.0;
  const double rx = size / 2.0, ry = size / 2.0 - 0.5 * rng.uniform01();
  auto inside = [&](int x, int y) {
    const double dx = (x - cx) / rx, dy = (y - cy) / ry;
    return x >= 0 && y >= 0 && x < size && y < size && dx * dx + dy * dy <= 1.0;
  };
  const int eye_y = static_cast<int>(cy) - (size > 5 ? 1 : 0), eye_dx = std::max(1, size / 4);
  for (int y = 0; y < size; ++y) {
    std::string row(static_cast<std::size_t>(size), '.');
    for (int x = 0; x < size; ++x) {
      if (!inside(x, y)) continue;
      const bool rim = !inside(x - 1, y) || !inside(x + 1, y) || !inside(x, y - 1) || !inside(x, y + 1);
      const bool eye = y == eye_y && (x == static_cast<int>(cx) - eye_dx || x == size - 1 - (static_cast<int>(cx) - eye_dx));
      row[static_cast<std::size_t>(x)] = eye ? '1' : (rim ? '2' : '0');
    }
    s.rows.push_back(row);
  }
  return s;
}

}  // namespace

SceneSpec procedural_scene(std::uint64_t seed, int width, int height, int frame_count) {
  Rng rng(derive_seed(seed, "procedural_scene"));
  SceneSpec s;
  s.name = "procedural";
  s.width = width;
  s.height = height;
  s.frame_count = frame_count;
  s.seed = seed;
  s.layers.resize(3);

  // Layer 0: ground band with a noise texture and static props.
  const int horizon = height - rng.uniform_int(height / 4, (2 * height) / 5);
  const Rgb ground_a = {static_cast<std::uint8_t>(rng.uniform_int(40, 110)),
                        static_cast<std::uint8_t>(rng.uniform_int(80, 160)),
                        static_cast<std::uint8_t>(rng.uniform_int(20, 70))};
  const Rgb ground_b = {static_cast<std::uint8_t>(std::min(255, ground_a.r + 14)),
                        static_cast<std::uint8_t>(std::min(255, ground_a.g + 12)),
                        static_cast<std::uint8_t>(std::min(255, ground_a.b + 8))};
  s.layers[0].push_back({0, horizon, width, height - horizon, {}, false, NoiseShape{ground_a, ground_b, 8}});
  const int props = rng.uniform_int(1, 3);
  for (int i = 0; i < props; ++i) {
    const int pw = rng.uniform_int(width / 12, width / 6);
    const int ph = rng.uniform_int(height / 6, height / 3);
    const int px = rng.uniform_int(0, width - pw);
    s.layers[0].push_back({px, horizon - ph, pw, ph, {}, false,
                           GradientShape{random_color(rng, 80, 230), random_color(rng, 30, 120), true}});
  }

  // Layer 1: wrapping sprites moving along the ground.
  const int sprites = rng.uniform_int(2, 3);
  for (int i = 0; i < sprites; ++i) {
    const int size = rng.uniform_int(5, 7);
    const int scale = std::max(1, height / 24);
    auto sprite = random_sprite(rng, size, scale);
    const int extent = size * scale;
    int speed = rng.uniform_int(std::max(2, width / 32), std::max(3, width / 12));
    if (rng.below(2) == 0) speed = -speed;
    const int y = std::clamp(horizon - extent + rng.uniform_int(-extent / 2, extent / 2), 0, height - extent);
    s.layers[1].push_back({rng.uniform_int(0, width - extent), y, 0, 0, {speed, 0}, true, std::move(sprite)});
  }

  // Layer 2: HUD panel with a health bar and an icon.
  const int panel_w = width / 3, panel_h = std::max(4, height / 5);
  const Rgb panel_top = random_color(rng, 20, 70);
  s.layers[2].push_back({2, 2, panel_w, panel_h, {}, false,
                         GradientShape{panel_top, {static_cast<std::uint8_t>(panel_top.r / 2),
                                                   static_cast<std::uint8_t>(panel_top.g / 2),
                                                   static_cast<std::uint8_t>(panel_top.b / 2)},
                                       true}});
  const int bar_h = std::max(1, panel_h / 4);
  s.layers[2].push_back({4, 2 + (panel_h - bar_h) / 2, std::max(1, panel_w - panel_h - 4), bar_h, {}, false,
                         RectShape{{static_cast<std::uint8_t>(rng.uniform_int(180, 240)), 40, 40}}});
  const int icon = std::max(1, (panel_h - 2) / 5);
  s.layers[2].push_back({2 + panel_w - panel_h + 1, 3, 0, 0, {}, false, random_sprite(rng, 5, icon)});

  // Layer 3: minimap inset in the bottom-right corner, drawn by its own camera.
  s.layers.emplace_back();
  const int map_w = std::max(8, width / 4), map_h = std::max(8, (2 * height) / 5);
  const Rect map{width - map_w - 2, height - map_h - 2, map_w, map_h};
  const Rgb map_light = random_color(rng, 120, 200);
  s.layers[3].push_back({map.x, map.y, map.w, map.h, {}, false,
                         GradientShape{map_light, {static_cast<std::uint8_t>(map_light.r / 4),
                                                   static_cast<std::uint8_t>(map_light.g / 4),
                                                   static_cast<std::uint8_t>(map_light.b / 4)},
                                       true}});
  s.layers[3].push_back({map.x, map.y, map.w, std::max(2, map.h / 4), {}, false, RectShape{random_color(rng, 200, 255)}});
  for (int i = 0; i < 2; ++i) {
    const int mw = std::max(2, map.w / 6), mh = std::max(2, map.h / 6);
    s.layers[3].push_back({map.x + rng.uniform_int(0, map.w - mw), map.y + map.h / 3 + rng.uniform_int(0, map.h / 2 - mh),
                           mw, mh, {}, false, RectShape{random_color(rng, 30, 255)}});
  }

  CameraSpec world;
  world.clear_flag = ClearFlag::kSkyBox;
  world.clear_color = {static_cast<std::uint8_t>(rng.uniform_int(40, 140)),
                       static_cast<std::uint8_t>(rng.uniform_int(100, 190)),
                       static_cast<std::uint8_t>(rng.uniform_int(190, 255))};
  world.layers = {0, 1};
  CameraSpec hud;
  hud.clear_flag = ClearFlag::kDepthOnly;
  hud.layers = {2};
  CameraSpec minimap;
  minimap.clear_flag = ClearFlag::kSolidColor;
  minimap.layers = {3};
  minimap.viewport = map;
  s.cameras = {world, hud, minimap};
  return s;
}

FaultSpec procedural_fault(const SceneSpec& scene, FaultType type, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "procedural_fault"));
  FaultSpec f;
  f.type = type;
  f.camera = 0;
  f.onset = rng.uniform_int(scene.frame_count > 1 ? 1 : 0, std::max(0, scene.frame_count / 2));
  // Inset cameras (those with a viewport) take camera-level faults when present.
  std::vector<int> insets;
  for (std::size_t c = 0; c < scene.cameras.size(); ++c)
    if (scene.cameras[c].viewport) insets.push_back(static_cast<int>(c));
  if (!insets.empty() && (type == FaultType::kCameraDisabled || type == FaultType::kStalePostEffect))
    f.camera = insets[rng.below(insets.size())];
  switch (type) {
    case FaultType::kCameraDisabled:
      f.texture = rng.below(2) == 0 ? GarbageTexture::kBlocks : GarbageTexture::kNoise;
      break;
    case FaultType::kClearFlagOverride:
      f.clear_flag = rng.below(2) == 0 ? ClearFlag::kNothing : ClearFlag::kDepthOnly;
      break;
    case FaultType::kStalePostEffect:
      f.effect = {PostEffectKind::kMirrorVertical, 1.0};
      break;
    case FaultType::kLetterbox:
      f.bars = rng.uniform_int(std::max(1, scene.height / 8), std::max(1, scene.height / 5));
      break;
  }
  return f;
}

}  // namespace glitch::render
