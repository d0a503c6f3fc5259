#include <gtest/gtest.h>

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>

#include "glitch/digest.hpp"
#include "glitch/glitchnet.hpp"
#include "glitch/manifest.hpp"
#include "glitch/rng.hpp"
#include "support.hpp"

using namespace glitch;
using testing_support::random_image;
using testing_support::TempDir;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(GLITCHLENS_BIN) + " --log-level off " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf;
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

fs::path write_normals(const fs::path& dir, int count) {
  DatasetManifest m{dir, {}};
  for (int i = 0; i < count; ++i) {
    const auto name = "n" + std::to_string(i) + ".png";
    write_png(dir / name, random_image(900 + i, 80, 48));
    ManifestRecord r;
    r.image = name;
    m.records.push_back(r);
  }
  write_manifest(dir / "normals.jsonl", m);
  return dir / "normals.jsonl";
}

// Digest of every file below dir, keyed by relative path.
std::map<std::string, std::string> tree_digest(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = sha256_file(e.path());
  return out;
}

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("synth-rules").code, 2);
  EXPECT_EQ(run("gradcheck --instances 0").code, 2);
  EXPECT_EQ(run("--help").code, 0);
}

TEST(Cli, SynthRulesOnePerRuleAndDeterministic) {
  TempDir in("cli_in"), a("cli_a"), b("cli_b");
  const auto normals = write_normals(in.path(), 4);
  const auto ra = run("--seed 7 --out " + q(a.path()) + " synth-rules --palette fixed --normals " + q(normals));
  ASSERT_EQ(ra.code, 0) << ra.out;
  EXPECT_NE(ra.out.find("glitch: 4"), std::string::npos) << ra.out;
  const auto m = read_manifest(a / "manifest.jsonl");
  std::set<std::string> rules;
  for (const auto& r : m.records)
    if (r.label == Label::kGlitch) {
      EXPECT_EQ(r.generator, Generator::kRuleF);
      EXPECT_EQ(r.provenance["dataset_seed"], 7);
      rules.insert(r.provenance["rule"].get<std::string>());
    }
  EXPECT_EQ(rules.size(), 4u);
  ASSERT_EQ(run("--seed 7 --out " + q(b.path()) + " synth-rules --palette fixed --normals " + q(normals)).code, 0);
  auto da = tree_digest(a.path()), db = tree_digest(b.path());
  EXPECT_EQ(da, db);
}

TEST(Cli, SynthRulesBadInputs) {
  TempDir in("cli_bad"), out("cli_bad_out");
  const auto normals = write_normals(in.path(), 1);
  EXPECT_EQ(run("--out " + q(out.path()) + " synth-rules --normals /nonexistent/m.jsonl").code, 3);
  EXPECT_EQ(run("--out " + q(out.path()) + " synth-rules --palette neon --normals " + q(normals)).code, 2);
  EXPECT_EQ(run("--out " + q(out.path()) + " synth-rules --rules sparkle --normals " + q(normals)).code, 2);
}

TEST(Cli, SynthInjectExampleScenes) {
  TempDir a("inj_a"), b("inj_b");
  const auto ra = run("--out " + q(a.path()) + " synth-inject --scenes " + q(SCENE_DIR));
  ASSERT_EQ(ra.code, 0) << ra.out;
  const auto m = read_manifest(a / "manifest.jsonl");
  EXPECT_GT(m.count(Label::kNormal), 0u);
  EXPECT_GT(m.count(Label::kGlitch), 0u);
  for (const auto& r : m.records)
    if (r.label == Label::kGlitch) {
      EXPECT_TRUE(r.glitch_class);
      EXPECT_TRUE(r.provenance.contains("fault"));
      EXPECT_EQ(r.provenance["dataset_seed"], 42);
    }
  ASSERT_EQ(run("--out " + q(b.path()) + " synth-inject --scenes " + q(SCENE_DIR)).code, 0);
  EXPECT_EQ(tree_digest(a.path()), tree_digest(b.path()));
}

TEST(Cli, MalformedSceneExitsTwoWithDiagnostic) {
  TempDir scenes("bad_scene"), out("bad_scene_out");
  std::ofstream(scenes / "broken.json") << "{\n  \"width\": 10,\n  oops\n}\n";
  const std::string cmd = std::string(GLITCHLENS_BIN) + " --out " + q(out.path()) + " synth-inject --scenes " +
                          q(scenes.path()) + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  std::string text;
  std::array<char, 1024> buf;
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), pipe)) text.append(buf.data(), n);
  const int status = pclose(pipe);
  EXPECT_EQ(WEXITSTATUS(status), 2);
  EXPECT_NE(text.find("broken.json:3:"), std::string::npos) << text;
}

TEST(Cli, TrainEvalDetectRoundTrip) {
  TempDir data("cli_data"), a("cli_train_a"), b("cli_train_b"), ev("cli_eval");
  const auto rules_dir = data / "rules";
  const auto normals = write_normals(data.path(), 6);
  ASSERT_EQ(run("--out " + q(rules_dir) + " synth-rules --normals " + q(normals)).code, 0);
  const auto manifest = rules_dir / "manifest.jsonl";
  const std::string train = " train --config " + q(fs::path(CONFIG_DIR) / "desk.json") + " --epochs 2 --batch-size 4 --manifest " + q(manifest);
  const auto ta = run("--out " + q(a.path()) + train);
  ASSERT_EQ(ta.code, 0) << ta.out;
  ASSERT_EQ(run("--out " + q(b.path()) + train).code, 0);
  EXPECT_EQ(sha256_file(a / "model.glib"), sha256_file(b / "model.glib"));
  std::ifstream log(a / "train_log.jsonl");
  int lines = 0;
  for (std::string line; std::getline(log, line);) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("loss") && j.contains("train_acc") && j.contains("val_acc"));
    ++lines;
  }
  EXPECT_EQ(lines, 2);

  const auto er = run("--out " + q(ev.path()) + " eval --checkpoint " + q(a / "model.glib") + " --manifest " + q(manifest));
  ASSERT_EQ(er.code, 0);
  EXPECT_NE(er.out.find("precision"), std::string::npos);
  EXPECT_TRUE(fs::exists(ev / "metrics.json"));
  const auto m = read_manifest(manifest);
  std::ifstream verdicts(ev / "verdicts.jsonl");
  std::size_t count = 0;
  for (std::string line; std::getline(verdicts, line);) ++count;
  EXPECT_EQ(count, m.records.size());

  const auto image = m.resolve(m.records.back().image);
  const auto dr = run("detect --checkpoint " + q(a / "model.glib") + " --image " + q(image) + " --saliency " +
                      q(ev / "heat.png") + " --saliency-raw " + q(ev / "heat.f32"));
  ASSERT_EQ(dr.code, 0);
  std::istringstream fields(dr.out);
  std::string label;
  double p0 = 0, p1 = 0;
  fields >> label >> p0 >> p1;
  EXPECT_TRUE(label == "normal" || label == "glitch") << dr.out;
  EXPECT_NEAR(p0 + p1, 1.0, 1e-5);
  const auto heat = read_png(ev / "heat.png");
  EXPECT_EQ(heat.width(), 80);
  EXPECT_EQ(fs::file_size(ev / "heat.f32"), 64u * 32u * 4u);
}

TEST(Cli, TrainZeroEpochsKeepsInitialization) {
  TempDir data("cli_zero"), out("cli_zero_out");
  const auto normals = write_normals(data.path(), 2);
  ASSERT_EQ(run("--out " + q(data / "rules") + " synth-rules --normals " + q(normals)).code, 0);
  ASSERT_EQ(run("--seed 5 --out " + q(out.path()) + " train --epochs 0 --config " + q(fs::path(CONFIG_DIR) / "desk.json") +
                " --manifest " + q(data / "rules" / "manifest.jsonl"))
                .code,
            0);
  const auto model = load_checkpoint(out / "model.glib");
  EXPECT_EQ(serialize_checkpoint(model), serialize_checkpoint(GlitchNet(ModelConfig::desk_scale(), derive_seed(5, "init"))));
}

TEST(Cli, ErrorFamiliesMapToExitCodes) {
  TempDir data("cli_err"), out("cli_err_out");
  const auto normals = write_normals(data.path(), 2);
  // single-class manifest -> data error
  EXPECT_EQ(run("--out " + q(out.path()) + " train --epochs 1 --config " + q(fs::path(CONFIG_DIR) / "desk.json") +
                " --manifest " + q(normals))
                .code,
            4);
  // corrupt checkpoint -> model error
  std::ofstream(data / "bad.glib") << "GLIBgarbage";
  EXPECT_EQ(run("--out " + q(out.path()) + " eval --checkpoint " + q(data / "bad.glib") + " --manifest " + q(normals)).code, 5);
  // undecodable image -> I/O error
  save_checkpoint(data / "ok.glib", GlitchNet(ModelConfig::desk_scale(), 1));
  std::ofstream(data / "junk.png") << "not a png";
  EXPECT_EQ(run("detect --checkpoint " + q(data / "ok.glib") + " --image " + q(data / "junk.png")).code, 3);
  // bad split fractions -> usage error
  EXPECT_EQ(run("--out " + q(out.path()) + " split --fractions 0.5,0.5,0.5 --manifest " + q(normals)).code, 2);
}

TEST(Cli, SplitWritesThreeManifests) {
  TempDir data("cli_split"), out("cli_split_out");
  const auto normals = write_normals(data.path(), 10);
  ASSERT_EQ(run("--out " + q(out.path()) + " split --manifest " + q(normals)).code, 0);
  std::size_t total = 0;
  for (const char* name : {"train.jsonl", "val.jsonl", "test.jsonl"}) total += read_manifest(out / name).records.size();
  EXPECT_EQ(total, 10u);
}

TEST(Cli, GradcheckPasses) {
  const auto r = run("gradcheck --instances 5");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("gradcheck: PASS"), std::string::npos);
}
