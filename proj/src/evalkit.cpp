#include "glitch/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "glitch/errors.hpp"
#include "glitch/rng.hpp"

namespace glitch {
namespace {

constexpr std::array<std::string_view, 8> kClassNames = {
    "abnormal_color_block", "random_noise", "partial_repetition", "frame_overlay",
    "object_missing",       "abnormal_text", "overexposed",       "black_border",
};
constexpr std::array<std::string_view, 4> kGeneratorNames = {"captured", "rule_R", "rule_F", "injection"};

const std::set<std::string> kFixedKeys = {"image", "label", "glitch_class", "mask", "generator", "seed"};

}  // namespace

std::string_view to_string(Label label) { return label == Label::kGlitch ? "glitch" : "normal"; }
std::string_view to_string(GlitchClass cls) { return kClassNames[static_cast<std::size_t>(cls)]; }
std::string_view to_string(Generator gen) { return kGeneratorNames[static_cast<std::size_t>(gen)]; }

Label parse_label(std::string_view s) {
  if (s == "normal") return Label::kNormal;
  if (s == "glitch") return Label::kGlitch;
  throw DataError("unknown label '" + std::string(s) + "' (expected normal or glitch)");
}

GlitchClass parse_glitch_class(std::string_view s) {
  for (std::size_t i = 0; i < kClassNames.size(); ++i)
    if (kClassNames[i] == s) return static_cast<GlitchClass>(i);
  throw DataError("unknown glitch_class '" + std::string(s) + "'");
}

Generator parse_generator(std::string_view s) {
  for (std::size_t i = 0; i < kGeneratorNames.size(); ++i)
    if (kGeneratorNames[i] == s) return static_cast<Generator>(i);
  throw DataError("unknown generator '" + std::string(s) + "'");
}

std::filesystem::path DatasetManifest::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  if (p.is_absolute()) return p;
  return (base_dir / p).lexically_normal();
}

std::size_t DatasetManifest::count(Label label) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [label](const ManifestRecord& r) { return r.label == label; }));
}

void DatasetManifest::validate() const {
  std::set<std::string> seen;
  for (const auto& r : records) {
    const auto key = resolve(r.image).string();
    if (!seen.insert(key).second) throw DataError("manifest: duplicate image path " + r.image);
    if (r.generator != Generator::kCaptured && r.label == Label::kGlitch && !r.mask) {
      throw DataError("manifest: generated glitch entry without mask: " + r.image);
    }
    if (r.generator != Generator::kCaptured && r.generator != Generator::kInjection && r.label == Label::kNormal) {
      throw DataError("manifest: rule generator cannot produce normal entry: " + r.image);
    }
  }
}

nlohmann::json to_json(const ManifestRecord& r) {
  nlohmann::json j = r.provenance.is_object() ? r.provenance : nlohmann::json::object();
  j["image"] = r.image;
  j["label"] = to_string(r.label);
  j["glitch_class"] = r.glitch_class ? nlohmann::json(to_string(*r.glitch_class)) : nlohmann::json(nullptr);
  j["mask"] = r.mask ? nlohmann::json(*r.mask) : nlohmann::json(nullptr);
  j["generator"] = to_string(r.generator);
  j["seed"] = r.seed;
  return j;
}

ManifestRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("manifest record must be a JSON object");
  ManifestRecord r;
  try {
    r.image = j.at("image").get<std::string>();
    r.label = parse_label(j.at("label").get<std::string>());
    if (j.contains("glitch_class") && !j["glitch_class"].is_null())
      r.glitch_class = parse_glitch_class(j["glitch_class"].get<std::string>());
    if (j.contains("mask") && !j["mask"].is_null()) r.mask = j["mask"].get<std::string>();
    r.generator = j.contains("generator") ? parse_generator(j["generator"].get<std::string>()) : Generator::kCaptured;
    r.seed = j.contains("seed") ? j["seed"].get<std::uint64_t>() : 0;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("manifest record: ") + e.what());
  }
  for (const auto& [key, value] : j.items()) {
    if (!kFixedKeys.contains(key)) r.provenance[key] = value;
  }
  return r;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open manifest");
  DatasetManifest m;
  m.base_dir = std::filesystem::absolute(path).parent_path();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      m.records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return m;
}

namespace {

std::string rebase(const DatasetManifest& from, const std::string& path, const std::filesystem::path& to_dir) {
  const auto abs = std::filesystem::absolute(from.resolve(path)).lexically_normal();
  auto rel = abs.lexically_relative(std::filesystem::absolute(to_dir).lexically_normal());
  return rel.empty() ? abs.generic_string() : rel.generic_string();
}

ManifestRecord rebased(const DatasetManifest& from, ManifestRecord r, const std::filesystem::path& to_dir) {
  r.image = rebase(from, r.image, to_dir);
  if (r.mask) r.mask = rebase(from, *r.mask, to_dir);
  return r;
}

}  // namespace

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  const auto dir = std::filesystem::absolute(path).parent_path();
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open manifest for writing");
  for (const auto& r : manifest.records) out << to_json(rebased(manifest, r, dir)).dump() << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

DatasetManifest merge_manifests(std::span<const DatasetManifest> parts, const std::filesystem::path& base_dir) {
  DatasetManifest out;
  out.base_dir = std::filesystem::absolute(base_dir).lexically_normal();
  for (const auto& part : parts)
    for (const auto& r : part.records) out.records.push_back(rebased(part, r, out.base_dir));
  return out;
}

ManifestSplit split_manifest(const DatasetManifest& manifest, std::array<double, 3> fractions, std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f >= 0.0)) throw SpecError("split_manifest: fractions must be non-negative");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-6) throw SpecError("split_manifest: fractions must sum to 1");

  static constexpr std::array<const char*, 3> kNames = {"train", "validation", "test"};
  std::array<std::vector<std::size_t>, 3> picked;
  Rng rng(seed);
  for (Label label : {Label::kNormal, Label::kGlitch}) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < manifest.records.size(); ++i)
      if (manifest.records[i].label == label) idx.push_back(i);
    // Fisher-Yates with the portable generator.
    for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);

    // Largest remainder: floors first, then hand out leftovers by
    // descending fractional part (ties to the earlier split).
    const auto n = static_cast<double>(idx.size());
    std::array<std::size_t, 3> counts{};
    std::array<double, 3> remainder{};
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      const double exact = fractions[s] * n;
      counts[s] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      remainder[s] = exact - static_cast<double>(counts[s]);
      assigned += counts[s];
    }
    std::array<std::size_t, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < idx.size(); ++k, ++assigned) ++counts[order[k % 3]];

    std::size_t pos = 0;
    for (std::size_t s = 0; s < 3; ++s) {
      picked[s].insert(picked[s].end(), idx.begin() + static_cast<std::ptrdiff_t>(pos),
                       idx.begin() + static_cast<std::ptrdiff_t>(pos + counts[s]));
      pos += counts[s];
    }
  }

  ManifestSplit out;
  std::array<DatasetManifest*, 3> targets = {&out.train, &out.validation, &out.test};
  for (std::size_t s = 0; s < 3; ++s) {
    std::sort(picked[s].begin(), picked[s].end());
    targets[s]->base_dir = manifest.base_dir;
    for (auto i : picked[s]) targets[s]->records.push_back(manifest.records[i]);
    if (fractions[s] > 0.0) {
      for (Label label : {Label::kNormal, Label::kGlitch}) {
        if (targets[s]->count(label) == 0) {
          out.warnings.push_back(std::string(kNames[s]) + " split has no " + std::string(to_string(label)) + " records");
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Metrics compute_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
  const auto total = tp + fp + tn + fn;
  if (total == 0) throw std::invalid_argument("compute_metrics: all confusion counts are zero");
  Metrics m{tp, fp, tn, fn, {}, {}, {}, {}};
  auto ratio = [](std::uint64_t num, std::uint64_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  m.accuracy = ratio(tp + tn, total);
  if (m.precision && m.recall && *m.precision + *m.recall > 0.0) {
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  }
  return m;
}

EvalReport evaluate(const Detector& detector, const DatasetManifest& manifest) {
  EvalReport report;
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  for (const auto& r : manifest.records) {
    const auto image = read_png(manifest.resolve(r.image));
    const auto p = predict(detector, image);
    report.verdicts.push_back({r.image, r.label, p.label, p.p_glitch()});
    const bool truth = r.label == Label::kGlitch;
    const bool said = p.label == Label::kGlitch;
    if (truth && said) ++tp;
    else if (!truth && said) ++fp;
    else if (!truth && !said) ++tn;
    else ++fn;
  }
  report.metrics = compute_metrics(tp, fp, tn, fn);
  return report;
}

nlohmann::json to_json(const Metrics& m) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json("undefined"); };
  return {{"tp", m.tp},
          {"fp", m.fp},
          {"tn", m.tn},
          {"fn", m.fn},
          {"precision", opt(m.precision)},
          {"recall", opt(m.recall)},
          {"f1", opt(m.f1)},
          {"accuracy", opt(m.accuracy)}};
}

nlohmann::json to_json(const Verdict& v) {
  return {{"image", v.image},
          {"truth", to_string(v.truth)},
          {"prediction", to_string(v.prediction)},
          {"p_glitch", v.p_glitch}};
}

std::string format_metric(const std::optional<double>& v) {
  if (!v) return "undefined";
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << *v;
  return os.str();
}

std::string format_metrics_table(const Metrics& m) {
  std::ostringstream os;
  os << "  TP " << m.tp << "  FP " << m.fp << "  TN " << m.tn << "  FN " << m.fn << "\n";
  os << std::left << std::setw(12) << "precision" << format_metric(m.precision) << "\n";
  os << std::left << std::setw(12) << "recall" << format_metric(m.recall) << "\n";
  os << std::left << std::setw(12) << "f1" << format_metric(m.f1) << "\n";
  os << std::left << std::setw(12) << "accuracy" << format_metric(m.accuracy) << "\n";
  return os.str();
}

}  // namespace glitch
