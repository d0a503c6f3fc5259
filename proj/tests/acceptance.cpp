// End-to-end acceptance run: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <string>

#include "glitch/augment_rules.hpp"
#include "glitch/digest.hpp"
#include "glitch/evalkit.hpp"
#include "glitch/glitchnet.hpp"
#include "glitch/gradcheck.hpp"
#include "glitch/rendersim.hpp"
#include "glitch/rng.hpp"
#include "glitch/saliency.hpp"
#include "support.hpp"

using namespace glitch;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Metric arithmetic

Outcome metric_reproduction() {
  const auto m = compute_metrics(191, 0, 365, 1);
  const bool ok = format_metric(m.precision) == "1.000" && format_metric(m.recall) == "0.995" &&
                  format_metric(m.f1) == "0.997" && format_metric(m.accuracy) == "0.998";
  return {ok, "P/R/F1/Acc = " + format_metric(m.precision) + "/" + format_metric(m.recall) + "/" +
                  format_metric(m.f1) + "/" + format_metric(m.accuracy)};
}

// ---------------------------------------------------------------------------
// 2. Gradient check

Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  const auto report = run_gradcheck(42, 5);
  const double secs = seconds_since(t0);
  double worst = 0;
  std::string failed;
  for (const auto& r : report.results) {
    worst = std::max(worst, r.max_rel_error / r.tolerance);
    if (!r.passed()) failed += " " + r.name;
  }
  return {report.passed() && secs < 120.0,
          fmt("%zu checks, worst error/tolerance %.3f, %.1fs%s", report.results.size(), worst, secs,
              failed.empty() ? "" : (" failed:" + failed).c_str())};
}

// ---------------------------------------------------------------------------
// 3. Conv / pool against nested loops

Outcome oracle_equivalence() {
  Rng rng(3);
  double worst_conv = 0, worst_pool = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int N = rng.uniform_int(1, 2), C = rng.uniform_int(1, 3), O = rng.uniform_int(1, 3);
    const int stride = rng.uniform_int(1, 2), pad = rng.uniform_int(0, 1);
    int H, W;
    do {
      H = rng.uniform_int(3, 8);
      W = rng.uniform_int(3, 8);
    } while ((H + 2 * pad - 3) % stride != 0 || (W + 2 * pad - 3) % stride != 0);
    const auto sz = [](int v) { return static_cast<std::size_t>(v); };
    const Tensor x = testing_support::random_tensor(10 + trial, {sz(N), sz(C), sz(H), sz(W)});
    const Tensor w = testing_support::random_tensor(90 + trial, {sz(O), sz(C), 3, 3});
    const Tensor b = testing_support::random_tensor(170 + trial, {sz(O)});
    const Tensor y = nn::conv2d(Var(x), Var(w), Var(b), {stride, pad}).value();
    const int OH = (H + 2 * pad - 3) / stride + 1, OW = (W + 2 * pad - 3) / stride + 1;
    std::size_t i = 0;
    for (int n = 0; n < N; ++n)
      for (int o = 0; o < O; ++o)
        for (int oy = 0; oy < OH; ++oy)
          for (int ox = 0; ox < OW; ++ox, ++i) {
            double s = b[o];
            for (int c = 0; c < C; ++c)
              for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                  const int iy = oy * stride - pad + ky, ix = ox * stride - pad + kx;
                  if (iy >= 0 && ix >= 0 && iy < H && ix < W)
                    s += static_cast<double>(x[((n * C + c) * H + iy) * W + ix]) * w[((o * C + c) * 3 + ky) * 3 + kx];
                }
            worst_conv = std::max(worst_conv, std::fabs(y[i] - s));
          }

    const int PH = 2 * rng.uniform_int(1, 4), PW = 2 * rng.uniform_int(1, 4);
    const Tensor px = testing_support::random_tensor(250 + trial, {sz(N), sz(C), sz(PH), sz(PW)});
    const Tensor py = nn::maxpool2d(Var(px), 2, 2).value();
    i = 0;
    for (int nc = 0; nc < N * C; ++nc)
      for (int oy = 0; oy < PH / 2; ++oy)
        for (int ox = 0; ox < PW / 2; ++ox, ++i) {
          float m = -INFINITY;
          for (int ky = 0; ky < 2; ++ky)
            for (int kx = 0; kx < 2; ++kx) m = std::max(m, px[(nc * PH + 2 * oy + ky) * PW + 2 * ox + kx]);
          worst_pool = std::max(worst_pool, static_cast<double>(std::fabs(py[i] - m)));
        }
  }
  return {worst_conv <= 1e-5 && worst_pool <= 1e-5,
          fmt("50 shapes, max |conv - ref| %.2e, max |pool - ref| %.2e", worst_conv, worst_pool)};
}

// ---------------------------------------------------------------------------
// Shared dataset helpers

ManifestRecord normal_record(const std::string& rel) {
  ManifestRecord r;
  r.image = rel;
  return r;
}

// Fault-free frames of procedural scenes written as PNGs.
DatasetManifest render_normals(std::uint64_t seed, int first_scene, int scenes, int frames, const fs::path& dir) {
  DatasetManifest m{fs::absolute(dir), {}};
  for (int s = first_scene; s < first_scene + scenes; ++s) {
    const auto spec = render::procedural_scene(derive_seed(seed, static_cast<std::uint64_t>(s)), 128, 64, frames);
    const auto imgs = render::render_scene(spec);
    for (int t = 0; t < frames; ++t) {
      const auto rel = fmt("scene%02d_%02d.png", s, t);
      write_png(m.base_dir / rel, imgs[static_cast<std::size_t>(t)]);
      m.records.push_back(normal_record(rel));
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// 4. Overfit

struct OverfitRun {
  bool fit = false;
  int epochs = 0;
  double initial_loss = 0;
  std::string checkpoint_digest;
  double seconds = 0;
};

OverfitRun overfit(std::uint64_t seed, const fs::path& dir) {
  const auto t0 = Clock::now();
  // 16 fault-free frames plus 16 rule glitches made from 16 other frames.
  const auto normals = render_normals(seed, 0, 4, 4, dir / "normals");
  const auto sources = render_normals(seed, 4, 4, 4, dir / "sources");
  const auto rules = generate_rule_dataset(sources, std::array{Rule::kSolidColorBlock, Rule::kRandomNoise, Rule::kMosaic,
                                                               Rule::kPartialRepetition},
                                           PaletteMode::kRandomRgb, seed, dir / "rules");
  const auto glitches = filter_manifest(rules, [](const ManifestRecord& r) { return r.label == Label::kGlitch; });
  const std::array parts{normals, glitches};
  const auto data = merge_manifests(parts, dir);

  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 16;
  cfg.seed = seed;
  cfg.stop_at_train_acc = 1.0;
  const auto result = train(data, ModelConfig::desk_scale(), cfg);
  OverfitRun out;
  out.initial_loss = result.initial_loss;
  out.epochs = static_cast<int>(result.log.size());
  out.fit = !result.log.empty() && result.log.back().train_acc == 1.0;
  // Re-verify with predict on decoded images.
  int agree = 0;
  for (const auto& r : data.records) agree += predict(result.model, read_png(data.resolve(r.image))).label == r.label;
  out.fit = out.fit && agree == static_cast<int>(data.records.size()) && data.records.size() == 32;
  out.checkpoint_digest = sha256_hex(std::span<const std::uint8_t>(serialize_checkpoint(result.model)));
  out.seconds = seconds_since(t0);
  return out;
}

// ---------------------------------------------------------------------------
// 5. Desk-scale experiment

struct Experiment {
  Metrics metrics;
  std::string checkpoint_digest;
  std::string metrics_digest;
  std::optional<GlitchNet> model;
  DatasetManifest heldout;
  std::map<std::string, int> composition;
  int selected_epoch = 0;
  double seconds = 0;
};

constexpr int kExperimentEpochs = 30;
constexpr double kMinVisible = 0.03;

// Fraction of model-resolution pixels whose largest channel difference is
// at least 32/255 after preprocessing.
double visible_fraction(const ImageRGB& a, const ImageRGB& b) {
  const auto ta = preprocess(a, 64, 32).to_vector(), tb = preprocess(b, 64, 32).to_vector();
  const std::size_t plane = 64 * 32;
  std::size_t changed = 0;
  for (std::size_t i = 0; i < plane; ++i) {
    float d = 0.0f;
    for (std::size_t c = 0; c < 3; ++c) d = std::max(d, std::fabs(ta[c * plane + i] - tb[c * plane + i]));
    changed += d >= 32.0f / 255.0f;
  }
  return static_cast<double>(changed) / plane;
}

// Shuffles each group, then takes one record per group in turn until `count`.
DatasetManifest pick_balanced(std::map<std::string, std::vector<ManifestRecord>> groups, std::size_t count,
                              const fs::path& base_dir, std::uint64_t seed, std::map<std::string, int>& composition) {
  DatasetManifest out{base_dir, {}};
  Rng rng(seed);
  for (auto& [name, recs] : groups)
    for (std::size_t i = recs.size(); i > 1; --i) std::swap(recs[i - 1], recs[rng.below(i)]);
  for (std::size_t round = 0; out.records.size() < count; ++round) {
    bool any = false;
    for (auto& [name, recs] : groups)
      if (round < recs.size() && out.records.size() < count) {
        out.records.push_back(recs[round]);
        ++composition[name];
        any = true;
      }
    if (!any) break;
  }
  return out;
}

Experiment experiment(std::uint64_t seed, const fs::path& dir) {
  const auto t0 = Clock::now();
  Experiment ex;

  // 20 scenes x 10 frames of normal play, each scene with one injected fault.
  constexpr std::array kFaults = {render::FaultType::kCameraDisabled, render::FaultType::kClearFlagOverride,
                                  render::FaultType::kStalePostEffect};
  std::vector<render::SceneSpec> scenes;
  std::vector<std::vector<render::FaultSpec>> faults;
  for (int s = 0; s < 20; ++s) {
    auto spec = render::procedural_scene(derive_seed(seed, static_cast<std::uint64_t>(100 + s)), 128, 64, 10);
    spec.name = fmt("scene%02d", s);
    faults.push_back({render::procedural_fault(spec, kFaults[s % 3], derive_seed(seed, static_cast<std::uint64_t>(200 + s)))});
    scenes.push_back(std::move(spec));
  }
  const auto injected = render::generate_injection_dataset(scenes, faults, seed, dir / "inject");
  const auto normals = filter_manifest(injected, [](const ManifestRecord& r) { return r.label == Label::kNormal; });

  // 100 injected glitches balanced over the three fault types, keeping only
  // frames where the fault visibly changed at least 1% of the pixels.
  std::map<std::pair<int, int>, std::string> clean_frame;
  for (const auto& r : normals.records)
    clean_frame[{r.provenance["scene_index"].get<int>(), r.provenance["frame"].get<int>()}] = r.image;
  std::map<std::string, std::vector<ManifestRecord>> by_type;
  for (const auto& r : injected.records) {
    if (r.label != Label::kGlitch) continue;
    const auto& clean = clean_frame.at({r.provenance["scene_index"].get<int>(), r.provenance["frame"].get<int>()});
    if (visible_fraction(read_png(injected.resolve(r.image)), read_png(injected.resolve(clean))) < kMinVisible) continue;
    by_type["inject:" + r.provenance["fault"]["type"].get<std::string>()].push_back(r);
  }
  const auto inj_glitch = pick_balanced(by_type, 100, injected.base_dir, derive_seed(seed, "pick"), ex.composition);

  // 100 rule glitches balanced over the four rules, made from fault-free
  // frames of 20 other scenes, with the same visibility requirement.
  const auto sources = render_normals(seed, 300, 20, 10, dir / "sources");
  const auto rules = generate_rule_dataset(sources, std::array{Rule::kPartialRepetition, Rule::kSolidColorBlock,
                                                               Rule::kMosaic, Rule::kRandomNoise},
                                           PaletteMode::kFixedPalette, seed, dir / "rules");
  std::map<std::string, std::vector<ManifestRecord>> by_rule;
  for (const auto& r : rules.records) {
    if (r.label != Label::kGlitch) continue;
    const auto source = sources.resolve(r.provenance["source"].get<std::string>());
    if (visible_fraction(read_png(rules.resolve(r.image)), read_png(source)) < kMinVisible) continue;
    by_rule["rule:" + r.provenance["rule"].get<std::string>()].push_back(r);
  }
  const auto rule_glitch = pick_balanced(by_rule, 100, rules.base_dir, derive_seed(seed, "pick_rules"), ex.composition);
  ex.composition["normal"] = static_cast<int>(normals.records.size());

  const std::array parts{normals, inj_glitch, rule_glitch};
  const auto all = merge_manifests(parts, dir);
  write_manifest(dir / "all.jsonl", all);
  const auto split = split_manifest(all, {0.7, 0.15, 0.15}, seed);

  TrainConfig cfg;
  cfg.epochs = kExperimentEpochs;
  cfg.batch_size = 16;
  cfg.seed = seed;
  const auto result = train(split.train, ModelConfig::desk_scale(), cfg, &split.validation);
  ex.selected_epoch = result.selected_epoch;
  const auto report = evaluate(result.model, split.test);
  ex.metrics = report.metrics;
  ex.checkpoint_digest = sha256_hex(std::span<const std::uint8_t>(serialize_checkpoint(result.model)));
  ex.metrics_digest = sha256_hex(to_json(report.metrics).dump());
  const std::array held{split.validation, split.test};
  ex.heldout = merge_manifests(held, dir);
  ex.model.emplace(result.model);
  ex.seconds = seconds_since(t0);
  return ex;
}

Outcome experiment_outcome(const Experiment& ex) {
  const auto& m = ex.metrics;
  const bool ok = m.f1 && m.recall && *m.f1 >= 0.95 && *m.recall >= 0.95 && ex.seconds < 1800.0;
  std::string comp;
  for (const auto& [k, v] : ex.composition) comp += fmt(" %s=%d", k.c_str(), v);
  return {ok, fmt("test TP=%llu FP=%llu TN=%llu FN=%llu, P/R/F1 = %s/%s/%s, epoch %d, %.0fs;%s",
                  static_cast<unsigned long long>(m.tp), static_cast<unsigned long long>(m.fp),
                  static_cast<unsigned long long>(m.tn), static_cast<unsigned long long>(m.fn),
                  format_metric(m.precision).c_str(), format_metric(m.recall).c_str(), format_metric(m.f1).c_str(),
                  ex.selected_epoch, ex.seconds, comp.c_str())};
}

// ---------------------------------------------------------------------------
// 6. Saliency localization

Outcome localization(const Experiment& ex) {
  double score_sum = 0, density_sum = 0;
  int used = 0;
  for (const auto& r : ex.heldout.records) {
    if (r.label != Label::kGlitch || !r.mask) continue;
    const auto img = read_png(ex.heldout.resolve(r.image));
    if (predict(*ex.model, img).label != Label::kGlitch) continue;
    const auto mask = read_mask_png(ex.heldout.resolve(*r.mask));
    const auto model_mask = mask_to_model(mask, 64, 32);
    if (model_mask.empty()) continue;
    const auto sal = compute_saliency(*ex.model, img);
    score_sum += localization_score(sal, mask, 0.05);
    density_sum += model_mask.density();
    ++used;
  }
  if (used == 0) return {false, "no correctly classified held-out glitches"};
  const double score = score_sum / used, density = density_sum / used;
  return {used >= 50 && score >= 3.0 * density,
          fmt("%d images, mean top-5%% score %.3f vs mask density %.3f (%.1fx)", used, score, density, score / density)};
}

// ---------------------------------------------------------------------------
// 8. Property suites

Outcome augmentation_properties() {
  constexpr std::array kRules = {Rule::kPartialRepetition, Rule::kSolidColorBlock, Rule::kMosaic, Rule::kRandomNoise};
  int failures = 0, cases = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const ImageRGB img = testing_support::random_image(seed, 64 + static_cast<int>(seed % 50), 48 + static_cast<int>(seed % 30));
    for (Rule rule : kRules)
      for (PaletteMode palette : {PaletteMode::kRandomRgb, PaletteMode::kFixedPalette}) {
        ++cases;
        const RuleSpec spec{rule, palette, seed, {}};
        const auto a = apply_rule(img, spec), b = apply_rule(img, spec);
        bool ok = a.image == b.image && a.mask == b.mask && !a.mask.empty();
        ok = ok && a.mask.density() >= 0.02 - 1e-12 && a.mask.density() <= 0.25 + 1e-12;
        for (int y = 0; ok && y < img.height(); ++y)
          for (int x = 0; ok && x < img.width(); ++x) {
            if (!a.mask.at(x, y)) ok = a.image.at(x, y) == img.at(x, y);
            else if (rule == Rule::kSolidColorBlock && palette == PaletteMode::kFixedPalette)
              ok = std::find(kFixedPalette.begin(), kFixedPalette.end(), a.image.at(x, y)) != kFixedPalette.end();
          }
        failures += !ok;
      }
  }
  bool off_palette = false;
  const ImageRGB img = testing_support::random_image(7, 64, 48);
  for (std::uint64_t seed = 0; seed < 1000 && !off_palette; ++seed)
    for (Rgb c : apply_solid_color_block(img, seed, PaletteMode::kRandomRgb).colors)
      off_palette = off_palette || std::find(kFixedPalette.begin(), kFixedPalette.end(), c) == kFixedPalette.end();
  return {failures == 0 && off_palette, fmt("%d/%d cases hold; random palette leaves the fixed set: %s", cases - failures,
                                            cases, off_palette ? "yes" : "no")};
}

Outcome injection_properties() {
  constexpr std::array kTypes = {render::FaultType::kCameraDisabled, render::FaultType::kClearFlagOverride,
                                 render::FaultType::kStalePostEffect, render::FaultType::kLetterbox};
  int mask_fail = 0, clear_fail = 0, mirror_fail = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto scene = render::procedural_scene(seed, 96, 48, 5);
    const auto fault = render::procedural_fault(scene, kTypes[seed % kTypes.size()], seed);
    const auto clean = render::render_scene(scene);
    const auto bad = render::render_with_fault(scene, fault);
    for (std::size_t t = 0; t < clean.size(); ++t) {
      GlitchMask d(scene.width, scene.height);
      for (int y = 0; y < scene.height; ++y)
        for (int x = 0; x < scene.width; ++x)
          if (!(bad.frames[t].at(x, y) == clean[t].at(x, y))) d.set(x, y);
      mask_fail += !(d == bad.masks[t]) || (static_cast<int>(t) < fault.onset && !d.empty());
    }

    // SolidColor ignores the previous frame; Nothing keeps it wherever nothing is drawn.
    auto solid = scene;
    solid.cameras[0].clear_flag = render::ClearFlag::kSolidColor;
    const auto p1 = testing_support::random_image(seed, 96, 48), p2 = testing_support::random_image(seed + 1, 96, 48);
    clear_fail += !(render::render_frame(solid, 1, p1).image == render::render_frame(solid, 1, p2).image);
    auto nothing = scene;
    nothing.cameras[0].clear_flag = render::ClearFlag::kNothing;
    const auto out = render::render_frame(nothing, 1, p1);
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 96; ++x)
        if (!out.coverage.at(x, y) && !(out.image.at(x, y) == p1.at(x, y))) {
          ++clear_fail;
          y = 48;
          break;
        }

    ImageRGB twice = clean[seed % clean.size()];
    const Rect vp{0, 0, 96, 48};
    for (int k = 0; k < 2; ++k) render::apply_post_effect(twice, vp, {render::PostEffectKind::kMirrorVertical, 1.0});
    mirror_fail += !(twice == clean[seed % clean.size()]);
  }
  return {mask_fail + clear_fail + mirror_fail == 0,
          fmt("100 cases: mask mismatches %d, clear-flag violations %d, mirror involution failures %d", mask_fail,
              clear_fail, mirror_fail)};
}

void report(int id, const char* name, const Outcome& o, int& failed) {
  std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
  std::fflush(stdout);
  failed += !o.pass;
}

}  // namespace

int main() {
  int failed = 0;
  testing_support::TempDir work("acceptance");
  constexpr std::uint64_t kSeed = 42;

  report(1, "metric reproduction", metric_reproduction(), failed);
  report(2, "gradient correctness", gradient_correctness(), failed);
  report(3, "oracle equivalence", oracle_equivalence(), failed);

  const auto fit_a = overfit(kSeed, work / "overfit_a");
  const double ln2 = std::log(2.0);
  report(4, "overfit sanity",
         {fit_a.fit && std::fabs(fit_a.initial_loss - ln2) <= 0.05 && fit_a.seconds < 300.0,
          fmt("32 images, 100%% train accuracy: %s after %d epoch(s), initial loss %.4f (ln 2 = %.4f), %.0fs",
              fit_a.fit ? "yes" : "no", fit_a.epochs, fit_a.initial_loss, ln2, fit_a.seconds)},
         failed);

  const auto ex_a = experiment(kSeed, work / "experiment_a");
  report(5, "desk-scale end-to-end", experiment_outcome(ex_a), failed);
  report(6, "saliency localization", localization(ex_a), failed);

  const auto fit_b = overfit(kSeed, work / "overfit_b");
  const auto ex_b = experiment(kSeed, work / "experiment_b");
  const bool same = fit_a.checkpoint_digest == fit_b.checkpoint_digest && ex_a.checkpoint_digest == ex_b.checkpoint_digest &&
                    ex_a.metrics_digest == ex_b.metrics_digest;
  report(7, "determinism",
         {same, fmt("overfit checkpoint %.12s/%.12s, experiment checkpoint %.12s/%.12s, metrics %.12s/%.12s",
                    fit_a.checkpoint_digest.c_str(), fit_b.checkpoint_digest.c_str(), ex_a.checkpoint_digest.c_str(),
                    ex_b.checkpoint_digest.c_str(), ex_a.metrics_digest.c_str(), ex_b.metrics_digest.c_str())},
         failed);

  const auto aug = augmentation_properties();
  const auto inj = injection_properties();
  report(8, "augmentation and injection properties",
         {aug.pass && inj.pass, "augment_rules " + aug.detail + "; rendersim " + inj.detail}, failed);

  std::printf("%s: %d of 8 criteria failed\n", failed == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL", failed);
  return failed == 0 ? 0 : 1;
}
