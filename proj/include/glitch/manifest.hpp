#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace glitch {

/// Class index used by the detector: 0 = normal, 1 = glitch.
enum class Label : int { kNormal = 0, kGlitch = 1 };

/// Visual glitch taxonomy (label vocabulary for generated data).
enum class GlitchClass {
  kAbnormalColorBlock,
  kRandomNoise,
  kPartialRepetition,
  kFrameOverlay,
  kObjectMissing,
  kAbnormalText,
  kOverexposed,
  kBlackBorder,
};

enum class Generator { kCaptured, kRuleR, kRuleF, kInjection };

std::string_view to_string(Label label);
std::string_view to_string(GlitchClass cls);
std::string_view to_string(Generator gen);
Label parse_label(std::string_view s);
GlitchClass parse_glitch_class(std::string_view s);
Generator parse_generator(std::string_view s);

struct ManifestRecord {
  std::string image;  // relative to the manifest's base directory unless absolute
  Label label = Label::kNormal;
  std::optional<GlitchClass> glitch_class;
  std::optional<std::string> mask;
  Generator generator = Generator::kCaptured;
  std::uint64_t seed = 0;
  /// Generator-specific fields (rule, scene, fault, frame, source ...),
  /// written inline next to the fixed fields.
  nlohmann::json provenance = nlohmann::json::object();
};

/// JSON Lines dataset index. Paths in records resolve against base_dir.
struct DatasetManifest {
  std::filesystem::path base_dir;
  std::vector<ManifestRecord> records;

  std::filesystem::path resolve(const std::string& path) const;
  std::size_t count(Label label) const;
  /// Throws DataError on duplicate paths or generated glitch entries without a mask.
  void validate() const;
};

nlohmann::json to_json(const ManifestRecord& record);
ManifestRecord record_from_json(const nlohmann::json& j);

/// Reads a manifest; base_dir becomes the file's directory. Throws IoError
/// for unreadable files and DataError (with the line number) for bad records.
DatasetManifest read_manifest(const std::filesystem::path& path);

/// Writes records with paths rewritten relative to the file's directory.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Concatenates manifests, re-expressing all paths relative to base_dir.
DatasetManifest merge_manifests(std::span<const DatasetManifest> parts, const std::filesystem::path& base_dir);

/// Keeps records matching the predicate.
template <typename Pred>
DatasetManifest filter_manifest(const DatasetManifest& manifest, Pred pred) {
  DatasetManifest out{manifest.base_dir, {}};
  for (const auto& r : manifest.records)
    if (pred(r)) out.records.push_back(r);
  return out;
}

struct ManifestSplit {
  DatasetManifest train, validation, test;
  std::vector<std::string> warnings;
};

/// Seeded stratified split. Fractions are (train, validation, test), each
/// >= 0, summing to 1. Within each label the shuffled records are cut by
/// largest-remainder rounding; each split keeps the input order.
ManifestSplit split_manifest(const DatasetManifest& manifest, std::array<double, 3> fractions, std::uint64_t seed);

}  // namespace glitch
