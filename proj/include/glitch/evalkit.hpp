#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "glitch/glitchnet.hpp"
#include "glitch/manifest.hpp"

namespace glitch {

/// Confusion counts with glitch as the positive class. A derived value is
/// nullopt ("undefined") when its denominator is zero; f1 is also undefined
/// when precision or recall is, or when both are zero.
struct Metrics {
  std::uint64_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::optional<double> precision, recall, f1, accuracy;
};

/// Throws std::invalid_argument when all counts are zero.
Metrics compute_metrics(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn);

struct Verdict {
  std::string image;
  Label truth = Label::kNormal;
  Label prediction = Label::kNormal;
  float p_glitch = 0.0f;
};

struct EvalReport {
  Metrics metrics;
  std::vector<Verdict> verdicts;
};

/// Predicts every record in manifest order. Throws IoError naming the path
/// of an unreadable image.
EvalReport evaluate(const Detector& detector, const DatasetManifest& manifest);

nlohmann::json to_json(const Metrics& m);
nlohmann::json to_json(const Verdict& v);

/// Fixed-width table with 3-decimal values ("undefined" for nullopt).
std::string format_metrics_table(const Metrics& m);

/// "0.998" style rendering, or "undefined".
std::string format_metric(const std::optional<double>& v);

}  // namespace glitch
