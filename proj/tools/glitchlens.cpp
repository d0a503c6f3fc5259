// glitchlens: dataset synthesis, training, evaluation and detection.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "glitch/augment_rules.hpp"
#include "glitch/errors.hpp"
#include "glitch/evalkit.hpp"
#include "glitch/glitchnet.hpp"
#include "glitch/gradcheck.hpp"
#include "glitch/rendersim.hpp"
#include "glitch/saliency.hpp"

namespace fs = std::filesystem;
using namespace glitch;

namespace {

enum ExitCode { kOk = 0, kFailed = 1, kUsage = 2, kIo = 3, kData = 4, kModel = 5 };

struct Globals {
  std::uint64_t seed = 42;
  fs::path out = ".";
  std::string log_level = "info";
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir, "cannot create directory: " + ec.message());
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open for writing");
  return out;
}

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SpecError(path.string() + ": invalid JSON (" + e.what() + ")");
  }
}

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string part;
    while (std::getline(ss, part, ','))
      if (!part.empty()) out.push_back(part);
  }
  return out;
}

void print_class_counts(const DatasetManifest& m) {
  std::map<std::string, std::size_t> classes;
  for (const auto& r : m.records)
    if (r.glitch_class) ++classes[std::string(to_string(*r.glitch_class))];
  std::printf("normal: %zu\nglitch: %zu\n", m.count(Label::kNormal), m.count(Label::kGlitch));
  for (const auto& [name, n] : classes) std::printf("  %-22s %zu\n", name.c_str(), n);
}

struct SynthRules {
  fs::path normals;
  std::vector<std::string> rules{"partial_repetition", "solid_color_block", "mosaic", "random_noise"};
  std::string palette = "random";

  int run(const Globals& g) const {
    std::vector<Rule> parsed;
    for (const auto& r : split_list(rules)) parsed.push_back(parse_rule(r));
    const auto mode = palette == "fixed" ? PaletteMode::kFixedPalette : PaletteMode::kRandomRgb;
    const auto input = read_manifest(normals);
    spdlog::info("applying {} rule(s) to {} normal image(s)", parsed.size(), input.count(Label::kNormal));
    const auto out = generate_rule_dataset(input, parsed, mode, g.seed, g.out);
    std::map<std::string, std::size_t> per_rule;
    for (const auto& r : out.records)
      if (r.provenance.contains("rule")) ++per_rule[r.provenance["rule"].get<std::string>()];
    std::printf("normal: %zu\nglitch: %zu\n", out.count(Label::kNormal), out.count(Label::kGlitch));
    for (const auto& [name, n] : per_rule) std::printf("  %-22s %zu\n", name.c_str(), n);
    std::printf("manifest: %s\n", (g.out / "manifest.jsonl").string().c_str());
    return kOk;
  }
};

struct SynthInject {
  fs::path scenes;

  int run(const Globals& g) const {
    const auto files = render::load_scene_dir(scenes);
    if (files.empty()) throw SpecError(scenes.string() + ": no scene files (*.json)");
    std::vector<render::SceneSpec> specs;
    std::vector<std::vector<render::FaultSpec>> faults;
    for (const auto& f : files) {
      specs.push_back(f.scene);
      faults.push_back(f.faults);
    }
    spdlog::info("rendering {} scene(s)", specs.size());
    const auto out = render::generate_injection_dataset(specs, faults, g.seed, g.out);
    print_class_counts(out);
    std::printf("manifest: %s\n", (g.out / "manifest.jsonl").string().c_str());
    return kOk;
  }
};

struct Split {
  fs::path manifest;
  std::vector<double> fractions{0.7, 0.15, 0.15};

  int run(const Globals& g) const {
    if (fractions.size() != 3) throw SpecError("--fractions needs three values");
    const auto input = read_manifest(manifest);
    const auto split = split_manifest(input, {fractions[0], fractions[1], fractions[2]}, g.seed);
    for (const auto& w : split.warnings) spdlog::warn("{}", w);
    ensure_dir(g.out);
    const std::pair<const char*, const DatasetManifest*> parts[] = {
        {"train", &split.train}, {"val", &split.validation}, {"test", &split.test}};
    for (const auto& [name, part] : parts) {
      write_manifest(g.out / (std::string(name) + ".jsonl"), *part);
      std::printf("%-5s normal %zu glitch %zu\n", name, part->count(Label::kNormal), part->count(Label::kGlitch));
    }
    return kOk;
  }
};

struct Train {
  fs::path manifest;
  fs::path config;
  fs::path validation;
  int epochs = 30;
  int batch_size = 16;
  float learning_rate = 1e-3f;

  int run(const Globals& g) const {
    const ModelConfig model_cfg = config.empty() ? ModelConfig{} : model_config_from_json(read_json_file(config));
    model_cfg.validate();
    if (epochs < 0) throw SpecError("--epochs must be >= 0");
    if (batch_size < 1) throw SpecError("--batch-size must be >= 1");
    if (!(learning_rate > 0.0f)) throw SpecError("--lr must be > 0");
    TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = batch_size;
    cfg.learning_rate = learning_rate;
    cfg.seed = g.seed;

    const auto train_set = read_manifest(manifest);
    std::optional<DatasetManifest> val;
    if (!validation.empty()) val = read_manifest(validation);

    ensure_dir(g.out);
    auto log = open_out(g.out / "train_log.jsonl");
    const auto result = train(train_set, model_cfg, cfg, val ? &*val : nullptr, [&](const EpochLog& e) {
      log << to_json(e).dump() << '\n';
      log.flush();
      spdlog::info("epoch {:3d} loss {:.4f} train_acc {:.3f}{}", e.epoch, e.loss, e.train_acc,
                   e.val_acc ? fmt::format(" val_acc {:.3f}", *e.val_acc) : std::string());
    });
    save_checkpoint(g.out / "model.glib", result.model);
    std::printf("initial_loss: %.6f\n", result.initial_loss);
    std::printf("selected_epoch: %d\n", result.selected_epoch);
    std::printf("checkpoint: %s\n", (g.out / "model.glib").string().c_str());
    return kOk;
  }
};

struct Eval {
  fs::path checkpoint;
  fs::path manifest;

  int run(const Globals& g) const {
    const auto model = load_checkpoint(checkpoint);
    const auto data = read_manifest(manifest);
    const auto report = evaluate(model, data);
    std::fputs(format_metrics_table(report.metrics).c_str(), stdout);
    ensure_dir(g.out);
    open_out(g.out / "metrics.json") << to_json(report.metrics).dump(2) << '\n';
    auto verdicts = open_out(g.out / "verdicts.jsonl");
    for (const auto& v : report.verdicts) verdicts << to_json(v).dump() << '\n';
    return kOk;
  }
};

struct Detect {
  fs::path checkpoint;
  fs::path image;
  fs::path saliency;
  fs::path raw;
  float alpha = 0.5f;

  int run(const Globals&) const {
    const auto model = load_checkpoint(checkpoint);
    const auto img = read_png(image);
    const auto p = predict(model, img);
    std::printf("%s %.6f %.6f\n", std::string(to_string(p.label)).c_str(), p.probabilities[0], p.p_glitch());
    if (!saliency.empty() || !raw.empty()) {
      const auto map = compute_saliency(model, img);
      if (!saliency.empty()) write_png(saliency, render_heatmap(map, img, alpha));
      if (!raw.empty()) write_saliency_raw(raw, map);
    }
    return kOk;
  }
};

struct GradCheck {
  int instances = 5;

  int run(const Globals& g) const {
    const auto report = run_gradcheck(g.seed, instances);
    for (const auto& r : report.results)
      std::printf("%-22s %s  max_rel_err %.3e  tol %.0e  instances %d\n", r.name.c_str(), r.passed() ? "PASS" : "FAIL",
                  r.max_rel_error, r.tolerance, r.instances);
    std::printf("gradcheck: %s\n", report.passed() ? "PASS" : "FAIL");
    return report.passed() ? kOk : kFailed;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GUI glitch screenshot synthesis, detection and localization"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every random choice")->capture_default_str();
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}))
      ->capture_default_str();

  SynthRules synth_rules;
  auto* sr = app.add_subcommand("synth-rules", "Apply heuristic glitch rules to normal screenshots");
  sr->add_option("--normals", synth_rules.normals, "Manifest of normal images")->required();
  sr->add_option("--rules", synth_rules.rules, "Rules, comma separated")->delimiter(',')->capture_default_str();
  sr->add_option("--palette", synth_rules.palette, "Block colors")->check(CLI::IsMember({"random", "fixed"}))->capture_default_str();

  SynthInject synth_inject;
  auto* si = app.add_subcommand("synth-inject", "Render scenes with injected pipeline faults");
  si->add_option("--scenes", synth_inject.scenes, "Directory of scene JSON files")->required();

  Split split;
  auto* sp = app.add_subcommand("split", "Stratified train/validation/test split of a manifest");
  sp->add_option("--manifest", split.manifest)->required();
  sp->add_option("--fractions", split.fractions, "train,val,test")->delimiter(',')->expected(3)->capture_default_str();

  Train train_cmd;
  auto* tr = app.add_subcommand("train", "Train the detector");
  tr->add_option("--manifest", train_cmd.manifest, "Training manifest")->required();
  tr->add_option("--config", train_cmd.config, "Model config JSON (default: full size)");
  tr->add_option("--val", train_cmd.validation, "Validation manifest for best-epoch selection");
  tr->add_option("--epochs", train_cmd.epochs)->capture_default_str();
  tr->add_option("--batch-size", train_cmd.batch_size)->capture_default_str();
  tr->add_option("--lr", train_cmd.learning_rate)->capture_default_str();

  Eval eval_cmd;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a manifest");
  ev->add_option("--checkpoint", eval_cmd.checkpoint)->required();
  ev->add_option("--manifest", eval_cmd.manifest)->required();

  Detect detect;
  auto* de = app.add_subcommand("detect", "Classify one screenshot");
  de->add_option("--checkpoint", detect.checkpoint)->required();
  de->add_option("--image", detect.image)->required();
  de->add_option("--saliency", detect.saliency, "Write a heatmap overlay PNG");
  de->add_option("--saliency-raw", detect.raw, "Write raw float32 saliency (+ .json sidecar)");
  de->add_option("--alpha", detect.alpha, "Heatmap opacity")->check(CLI::Range(0.0f, 1.0f))->capture_default_str();

  GradCheck gradcheck;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every layer and the full network");
  gc->add_option("--instances", gradcheck.instances)->check(CLI::PositiveNumber)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  spdlog::set_default_logger(spdlog::stderr_color_st("glitchlens"));
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    if (sr->parsed()) return synth_rules.run(g);
    if (si->parsed()) return synth_inject.run(g);
    if (sp->parsed()) return split.run(g);
    if (tr->parsed()) return train_cmd.run(g);
    if (ev->parsed()) return eval_cmd.run(g);
    if (de->parsed()) return detect.run(g);
    if (gc->parsed()) return gradcheck.run(g);
  } catch (const SpecError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kUsage;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kIo;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kData;
  } catch (const ModelError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kModel;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailed;
  }
  return kUsage;
}
