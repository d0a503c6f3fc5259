#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "glitch/image.hpp"
#include "glitch/manifest.hpp"

namespace glitch::render {

struct Offset {
  int dx = 0, dy = 0;
};

struct RectShape {
  Rgb color;
};

/// Linear blend from `from` to `to`, left to right or top to bottom.
struct GradientShape {
  Rgb from, to;
  bool vertical = true;
};

struct CheckerShape {
  Rgb a, b;
  int cell = 8;
};

/// Smooth value noise between two colors: random levels on a lattice of
/// `cell` pixels, bilinearly interpolated. Lattice values come from the
/// scene seed and the drawable index.
struct NoiseShape {
  Rgb a, b;
  int cell = 8;
};

/// Indexed bitmap. rows[y][x] is '.' (transparent) or a digit indexing
/// palette. Each bitmap pixel covers scale x scale canvas pixels.
struct SpriteShape {
  std::vector<std::string> rows;
  std::vector<Rgb> palette;
  int scale = 1;
};

using Shape = std::variant<RectShape, GradientShape, CheckerShape, NoiseShape, SpriteShape>;

/// A drawable placed at (x, y) at frame 0 and displaced by velocity per frame.
/// Sprites take their size from the bitmap; other shapes use w x h. With
/// wrap, positions re-enter from the opposite canvas edge.
struct DrawableSpec {
  int x = 0, y = 0, w = 0, h = 0;
  Offset velocity;
  bool wrap = false;
  Shape shape;

  int width() const;
  int height() const;
};

enum class ClearFlag { kSkyBox, kSolidColor, kDepthOnly, kNothing };

enum class PostEffectKind { kMirrorVertical, kMirrorHorizontal, kOverexpose };

struct PostEffect {
  PostEffectKind kind = PostEffectKind::kMirrorVertical;
  double gain = 1.0;
};

struct CameraSpec {
  bool enabled = true;
  ClearFlag clear_flag = ClearFlag::kSkyBox;
  Rgb clear_color;
  std::vector<int> layers;
  /// Screen rectangle the camera renders into; empty means the full canvas.
  std::optional<Rect> viewport;
  std::vector<PostEffect> post_effects;
};

struct SceneSpec {
  std::string name = "scene";
  int width = 128;
  int height = 64;
  int frame_count = 1;
  std::uint64_t seed = 0;
  std::vector<std::vector<DrawableSpec>> layers;
  std::vector<CameraSpec> cameras;

  /// Throws SpecError naming the offending field.
  void validate() const;
  Rect camera_viewport(std::size_t camera) const;
};

enum class FaultType { kCameraDisabled, kClearFlagOverride, kStalePostEffect, kLetterbox };

/// Texture written into the region of a disabled camera.
enum class GarbageTexture { kBlocks, kNoise };

struct FaultSpec {
  FaultType type = FaultType::kCameraDisabled;
  int camera = 0;
  int onset = 0;
  ClearFlag clear_flag = ClearFlag::kNothing;  // kClearFlagOverride
  PostEffect effect;                           // kStalePostEffect
  GarbageTexture texture = GarbageTexture::kBlocks;  // kCameraDisabled
  int bars = 0;                                // kLetterbox: bar height in pixels

  void validate(const SceneSpec& scene) const;
  GlitchClass glitch_class() const;
};

std::string_view to_string(ClearFlag flag);
std::string_view to_string(PostEffectKind kind);
std::string_view to_string(FaultType type);
std::string_view to_string(GarbageTexture texture);

struct FrameOutput {
  ImageRGB image;
  /// Pixels assigned during this frame (clears, draws, textures, effects).
  GlitchMask coverage;
};

/// Renders frame t on top of the previous screen contents.
FrameOutput render_frame(const SceneSpec& scene, int t, const ImageRGB& previous, const FaultSpec* fault = nullptr);

/// Fault-free frames. The screen starts black and persists between frames.
std::vector<ImageRGB> render_scene(const SceneSpec& scene);

struct FaultedRender {
  std::vector<ImageRGB> frames;
  /// Per frame: pixels that differ from the fault-free render.
  std::vector<GlitchMask> masks;
  GlitchClass glitch_class;
};

FaultedRender render_with_fault(const SceneSpec& scene, const FaultSpec& fault);

/// Applies a post effect to the viewport region of an image in place.
void apply_post_effect(ImageRGB& image, const Rect& viewport, const PostEffect& effect);

struct SceneFile {
  SceneSpec scene;
  std::vector<FaultSpec> faults;
};

/// Parses the scene JSON schema. `source` prefixes diagnostics. Throws
/// SpecError with line/column for syntax errors and the field path for
/// schema errors.
SceneFile parse_scene(std::string_view text, const std::string& source = "scene");
SceneFile load_scene(const std::filesystem::path& path);
/// All *.json files in a directory, sorted by file name.
std::vector<SceneFile> load_scene_dir(const std::filesystem::path& dir);
nlohmann::json to_json(const SceneFile& file);

/// Per-scene seed used by the dataset generator.
std::uint64_t scene_seed(std::uint64_t seed, std::size_t scene_index, std::uint64_t scene_seed);

/// Writes every fault-free frame (normal) and every faulted frame from onset
/// on whose mask is nonempty (glitch) under out_dir, plus
/// out_dir/manifest.jsonl. faults[i] lists the faults injected into scenes[i].
DatasetManifest generate_injection_dataset(std::span<const SceneSpec> scenes,
                                           std::span<const std::vector<FaultSpec>> faults, std::uint64_t seed,
                                           const std::filesystem::path& out_dir);

/// Procedural scene: sky-box world camera with terrain, props and moving
/// sprites, a depth-only HUD camera drawing a panel and icons, and a
/// solid-clear minimap camera confined to a bottom-right viewport.
SceneSpec procedural_scene(std::uint64_t seed, int width, int height, int frame_count);

/// Procedural fault of the given type for a procedural scene. Camera-disabled
/// and stale post-effect faults target an inset camera when the scene has one.
FaultSpec procedural_fault(const SceneSpec& scene, FaultType type, std::uint64_t seed);

}  // namespace glitch::render
