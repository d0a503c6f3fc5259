#include <algorithm>
#include <fstream>
#include <sstream>

#include "glitch/errors.hpp"
#include "glitch/rendersim.hpp"

namespace glitch::render {
namespace {

using nlohmann::json;

template <typename... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <typename... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

class Reader {
 public:
  Reader(const std::string& source) : source_(source) {}

  [[noreturn]] void fail(const std::string& path, const std::string& what) const {
    throw SpecError(source_ + ": field '" + path + "': " + what);
  }

  const json& require(const json& obj, const std::string& path, const char* key) const {
    if (!obj.is_object()) fail(path, "expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) fail(join(path, key), "missing required field");
    return *it;
  }

  int integer(const json& v, const std::string& path) const {
    if (!v.is_number_integer()) fail(path, "expected an integer");
    const auto n = v.get<long long>();
    if (n < -1000000 || n > 1000000) fail(path, "integer out of range");
    return static_cast<int>(n);
  }

  int integer(const json& obj, const std::string& path, const char* key, std::optional<int> fallback = {}) const {
    if (fallback && (!obj.is_object() || !obj.contains(key))) return *fallback;
    return integer(require(obj, path, key), join(path, key));
  }

  double number(const json& obj, const std::string& path, const char* key, double fallback) const {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj[key];
    if (!v.is_number()) fail(join(path, key), "expected a number");
    return v.get<double>();
  }

  bool boolean(const json& obj, const std::string& path, const char* key, bool fallback) const {
    if (!obj.contains(key)) return fallback;
    const auto& v = obj[key];
    if (!v.is_boolean()) fail(join(path, key), "expected true or false");
    return v.get<bool>();
  }

  std::string string(const json& obj, const std::string& path, const char* key,
                     std::optional<std::string> fallback = {}) const {
    if (fallback && !obj.contains(key)) return *fallback;
    const auto& v = require(obj, path, key);
    if (!v.is_string()) fail(join(path, key), "expected a string");
    return v.get<std::string>();
  }

  Rgb color(const json& obj, const std::string& path, const char* key, std::optional<Rgb> fallback = {}) const {
    if (fallback && !obj.contains(key)) return *fallback;
    const auto& v = require(obj, path, key);
    return color(v, join(path, key));
  }

  Rgb color(const json& v, const std::string& path) const {
    if (!v.is_array() || v.size() != 3) fail(path, "expected [r, g, b]");
    std::array<std::uint8_t, 3> c{};
    for (std::size_t i = 0; i < 3; ++i) {
      const int n = integer(v[i], path + "[" + std::to_string(i) + "]");
      if (n < 0 || n > 255) fail(path + "[" + std::to_string(i) + "]", "channel must be in 0..255");
      c[i] = static_cast<std::uint8_t>(n);
    }
    return {c[0], c[1], c[2]};
  }

  const json& array(const json& obj, const std::string& path, const char* key) const {
    const auto& v = require(obj, path, key);
    if (!v.is_array()) fail(join(path, key), "expected an array");
    return v;
  }

  static std::string join(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }
  static std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

 private:
  std::string source_;
};

template <typename E, std::size_t N>
E pick(const Reader& r, const std::string& path, const std::string& value, const std::array<E, N>& options) {
  std::string expected;
  for (const auto e : options) {
    if (to_string(e) == value) return e;
    expected += (expected.empty() ? "" : ", ") + std::string(to_string(e));
  }
  r.fail(path, "unknown value '" + value + "' (expected one of " + expected + ")");
}

constexpr std::array<ClearFlag, 4> kClearFlags = {ClearFlag::kSkyBox, ClearFlag::kSolidColor, ClearFlag::kDepthOnly,
                                                  ClearFlag::kNothing};
constexpr std::array<PostEffectKind, 3> kEffects = {PostEffectKind::kMirrorVertical, PostEffectKind::kMirrorHorizontal,
                                                    PostEffectKind::kOverexpose};
constexpr std::array<FaultType, 4> kFaultTypes = {FaultType::kCameraDisabled, FaultType::kClearFlagOverride,
                                                  FaultType::kStalePostEffect, FaultType::kLetterbox};
constexpr std::array<GarbageTexture, 2> kTextures = {GarbageTexture::kBlocks, GarbageTexture::kNoise};

DrawableSpec parse_drawable(const Reader& r, const json& j, const std::string& path) {
  DrawableSpec d;
  const auto type = r.string(j, path, "type");
  d.x = r.integer(j, path, "x", 0);
  d.y = r.integer(j, path, "y", 0);
  d.wrap = r.boolean(j, path, "wrap", false);
  if (j.contains("velocity")) {
    const auto& v = j["velocity"];
    const auto vpath = Reader::join(path, "velocity");
    if (!v.is_array() || v.size() != 2) r.fail(vpath, "expected [dx, dy]");
    d.velocity = {r.integer(v[0], vpath + "[0]"), r.integer(v[1], vpath + "[1]")};
  }
  if (type == "sprite") {
    SpriteShape s;
    s.scale = r.integer(j, path, "scale", 1);
    const auto& rows = r.array(j, path, "rows");
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[i].is_string()) r.fail(Reader::index(Reader::join(path, "rows"), i), "expected a string");
      s.rows.push_back(rows[i].get<std::string>());
    }
    const auto& palette = r.array(j, path, "palette");
    for (std::size_t i = 0; i < palette.size(); ++i)
      s.palette.push_back(r.color(palette[i], Reader::index(Reader::join(path, "palette"), i)));
    d.shape = std::move(s);
    return d;
  }
  d.w = r.integer(j, path, "w");
  d.h = r.integer(j, path, "h");
  if (type == "rect") {
    d.shape = RectShape{r.color(j, path, "color")};
  } else if (type == "gradient") {
    const auto dir = r.string(j, path, "direction", std::string("vertical"));
    if (dir != "vertical" && dir != "horizontal")
      r.fail(Reader::join(path, "direction"), "expected vertical or horizontal");
    d.shape = GradientShape{r.color(j, path, "from"), r.color(j, path, "to"), dir == "vertical"};
  } else if (type == "checker") {
    d.shape = CheckerShape{r.color(j, path, "a"), r.color(j, path, "b"), r.integer(j, path, "cell", 8)};
  } else if (type == "noise") {
    d.shape = NoiseShape{r.color(j, path, "a"), r.color(j, path, "b"), r.integer(j, path, "cell", 8)};
  } else {
    r.fail(Reader::join(path, "type"), "unknown drawable '" + type + "' (expected rect, gradient, checker, noise or sprite)");
  }
  return d;
}

PostEffect parse_effect(const Reader& r, const json& j, const std::string& path) {
  PostEffect e;
  e.kind = pick(r, Reader::join(path, "type"), r.string(j, path, "type"), kEffects);
  e.gain = r.number(j, path, "gain", 1.0);
  return e;
}

json color_json(Rgb c) { return json::array({c.r, c.g, c.b}); }

json drawable_json(const DrawableSpec& d) {
  json j = {{"x", d.x}, {"y", d.y}};
  if (d.velocity.dx != 0 || d.velocity.dy != 0) j["velocity"] = {d.velocity.dx, d.velocity.dy};
  if (d.wrap) j["wrap"] = true;
  std::visit(Overloaded{
                 [&](const RectShape& s) { j.update({{"type", "rect"}, {"color", color_json(s.color)}}); },
                 [&](const GradientShape& s) {
                   j.update({{"type", "gradient"}, {"from", color_json(s.from)}, {"to", color_json(s.to)},
                             {"direction", s.vertical ? "vertical" : "horizontal"}});
                 },
                 [&](const CheckerShape& s) {
                   j.update({{"type", "checker"}, {"a", color_json(s.a)}, {"b", color_json(s.b)}, {"cell", s.cell}});
                 },
                 [&](const NoiseShape& s) {
                   j.update({{"type", "noise"}, {"a", color_json(s.a)}, {"b", color_json(s.b)}, {"cell", s.cell}});
                 },
                 [&](const SpriteShape& s) {
                   json palette = json::array();
                   for (const auto& c : s.palette) palette.push_back(color_json(c));
                   j.update({{"type", "sprite"}, {"rows", s.rows}, {"palette", palette}, {"scale", s.scale}});
                 },
             },
             d.shape);
  if (!std::holds_alternative<SpriteShape>(d.shape)) {
    j["w"] = d.w;
    j["h"] = d.h;
  }
  return j;
}

}  // namespace

SceneFile parse_scene(std::string_view text, const std::string& source) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    const std::size_t pos = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n');
    const auto line_start = text.rfind('\n', pos == 0 ? 0 : pos - 1);
    const auto column = pos - (line_start == std::string_view::npos ? 0 : line_start + 1) + 1;
    throw SpecError(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": invalid JSON");
  }

  const Reader r(source);
  if (!root.is_object()) r.fail("(root)", "expected an object");
  SceneFile file;
  auto& s = file.scene;
  s.name = r.string(root, "", "name", std::string("scene"));
  s.width = r.integer(root, "", "width");
  s.height = r.integer(root, "", "height");
  s.frame_count = r.integer(root, "", "frame_count", 1);
  if (root.contains("seed")) {
    if (!root["seed"].is_number_unsigned() && !root["seed"].is_number_integer()) r.fail("seed", "expected an integer");
    if (root["seed"].is_number_integer() && root["seed"].get<long long>() < 0) r.fail("seed", "must be nonnegative");
    s.seed = root["seed"].get<std::uint64_t>();
  }

  const auto& layers = r.array(root, "", "layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto lpath = Reader::index("layers", l);
    if (!layers[l].is_array()) r.fail(lpath, "expected an array of drawables");
    auto& out = s.layers.emplace_back();
    for (std::size_t i = 0; i < layers[l].size(); ++i) out.push_back(parse_drawable(r, layers[l][i], Reader::index(lpath, i)));
  }

  const auto& cameras = r.array(root, "", "cameras");
  for (std::size_t c = 0; c < cameras.size(); ++c) {
    const auto path = Reader::index("cameras", c);
    const auto& j = cameras[c];
    CameraSpec cam;
    cam.enabled = r.boolean(j, path, "enabled", true);
    cam.clear_flag = pick(r, Reader::join(path, "clear_flag"), r.string(j, path, "clear_flag"), kClearFlags);
    cam.clear_color = r.color(j, path, "clear_color", Rgb{});
    const auto& lm = r.array(j, path, "layers");
    for (std::size_t i = 0; i < lm.size(); ++i) cam.layers.push_back(r.integer(lm[i], Reader::index(Reader::join(path, "layers"), i)));
    if (j.contains("viewport")) {
      const auto vpath = Reader::join(path, "viewport");
      const auto& v = j["viewport"];
      if (!v.is_array() || v.size() != 4) r.fail(vpath, "expected [x, y, w, h]");
      cam.viewport = Rect{r.integer(v[0], vpath), r.integer(v[1], vpath), r.integer(v[2], vpath), r.integer(v[3], vpath)};
    }
    if (j.contains("post_effects")) {
      const auto& effects = r.array(j, path, "post_effects");
      for (std::size_t i = 0; i < effects.size(); ++i)
        cam.post_effects.push_back(parse_effect(r, effects[i], Reader::index(Reader::join(path, "post_effects"), i)));
    }
    s.cameras.push_back(std::move(cam));
  }

  if (root.contains("faults")) {
    const auto& faults = r.array(root, "", "faults");
    for (std::size_t i = 0; i < faults.size(); ++i) {
      const auto path = Reader::index("faults", i);
      const auto& j = faults[i];
      FaultSpec f;
      f.type = pick(r, Reader::join(path, "type"), r.string(j, path, "type"), kFaultTypes);
      f.camera = r.integer(j, path, "camera", 0);
      f.onset = r.integer(j, path, "onset");
      switch (f.type) {
        case FaultType::kCameraDisabled:
          f.texture = pick(r, Reader::join(path, "texture"), r.string(j, path, "texture", std::string("blocks")), kTextures);
          break;
        case FaultType::kClearFlagOverride:
          f.clear_flag = pick(r, Reader::join(path, "value"), r.string(j, path, "value"), kClearFlags);
          break;
        case FaultType::kStalePostEffect:
          f.effect.kind = pick(r, Reader::join(path, "effect"), r.string(j, path, "effect"), kEffects);
          f.effect.gain = r.number(j, path, "gain", 1.0);
          break;
        case FaultType::kLetterbox:
          f.bars = r.integer(j, path, "bars");
          break;
      }
      file.faults.push_back(f);
    }
  }

  try {
    s.validate();
    for (const auto& f : file.faults) f.validate(s);
  } catch (const SpecError& e) {
    throw SpecError(source + ": " + e.what());
  }
  return file;
}

SceneFile load_scene(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open scene file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str(), path.string());
}

std::vector<SceneFile> load_scene_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) throw IoError(dir, "not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  std::vector<SceneFile> out;
  for (const auto& f : files) out.push_back(load_scene(f));
  return out;
}

nlohmann::json to_json(const SceneFile& file) {
  const auto& s = file.scene;
  json layers = json::array();
  for (const auto& layer : s.layers) {
    json items = json::array();
    for (const auto& d : layer) items.push_back(drawable_json(d));
    layers.push_back(items);
  }
  json cameras = json::array();
  for (const auto& c : s.cameras) {
    json j = {{"enabled", c.enabled}, {"clear_flag", to_string(c.clear_flag)}, {"clear_color", color_json(c.clear_color)},
              {"layers", c.layers}};
    if (c.viewport) j["viewport"] = {c.viewport->x, c.viewport->y, c.viewport->w, c.viewport->h};
    if (!c.post_effects.empty()) {
      json effects = json::array();
      for (const auto& e : c.post_effects) {
        json ej = {{"type", to_string(e.kind)}};
        if (e.kind == PostEffectKind::kOverexpose) ej["gain"] = e.gain;
        effects.push_back(ej);
      }
      j["post_effects"] = effects;
    }
    cameras.push_back(j);
  }
  json faults = json::array();
  for (const auto& f : file.faults) {
    json j = {{"type", to_string(f.type)}, {"camera", f.camera}, {"onset", f.onset}};
    switch (f.type) {
      case FaultType::kCameraDisabled: j["texture"] = to_string(f.texture); break;
      case FaultType::kClearFlagOverride: j["value"] = to_string(f.clear_flag); break;
      case FaultType::kStalePostEffect:
        j["effect"] = to_string(f.effect.kind);
        if (f.effect.kind == PostEffectKind::kOverexpose) j["gain"] = f.effect.gain;
        break;
      case FaultType::kLetterbox: j["bars"] = f.bars; break;
    }
    faults.push_back(j);
  }
  return {{"name", s.name}, {"width", s.width}, {"height", s.height}, {"frame_count", s.frame_count}, {"seed", s.seed},
          {"layers", layers}, {"cameras", cameras}, {"faults", faults}};
}

}  // namespace glitch::render
