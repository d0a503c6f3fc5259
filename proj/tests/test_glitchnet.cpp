#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "glitch/glitchnet.hpp"
#include "glitch/rng.hpp"
#include "support.hpp"

using namespace glitch;
using testing_support::random_image;
using testing_support::TempDir;

namespace {

class ConstantDetector final : public Detector {
 public:
  explicit ConstantDetector(std::vector<float> logits) : logits_(std::move(logits)) {}
  int input_width() const override { return 8; }
  int input_height() const override { return 4; }
  int num_classes() const override { return static_cast<int>(logits_.size()); }
  Var logits(const Var& input) const override {
    std::vector<float> out;
    for (std::size_t n = 0; n < input.shape()[0]; ++n) out.insert(out.end(), logits_.begin(), logits_.end());
    return Var(Tensor({input.shape()[0], logits_.size()}, out));
  }

 private:
  std::vector<float> logits_;
};

// Balanced set: glitch images carry a saturated magenta block.
DatasetManifest write_toy_set(const std::filesystem::path& dir, int per_class, bool flip = false) {
  DatasetManifest m{dir, {}};
  for (int i = 0; i < 2 * per_class; ++i) {
    ImageRGB img = random_image(1000 + i, 64, 32);
    const bool glitch = i % 2 == 1;
    if (glitch) {
      Rng rng(i);
      const int x0 = rng.uniform_int(0, 32), y0 = rng.uniform_int(0, 16);
      for (int y = y0; y < y0 + 16; ++y)
        for (int x = x0; x < x0 + 32; ++x) img.set(x, y, {255, 0, 255});
    }
    const auto name = "img" + std::to_string(i) + ".png";
    write_png(dir / name, img);
    ManifestRecord r;
    r.image = name;
    r.label = (glitch != flip) ? Label::kGlitch : Label::kNormal;
    m.records.push_back(r);
  }
  return m;
}

// Independent walk over the layer list.
std::size_t count_parameters(const std::vector<int>& convs, int flatten, const std::vector<int>& fcs) {
  std::size_t n = 0;
  int in = 3;
  for (int c : convs) {
    n += static_cast<std::size_t>(c) * in * 9 + c + 2 * c;
    in = c;
  }
  in = flatten;
  for (int d : fcs) {
    n += static_cast<std::size_t>(d) * in + d;
    in = d;
  }
  return n;
}

}  // namespace

TEST(ModelConfig, FlattenSizes) {
  EXPECT_EQ(ModelConfig{}.flatten_size(), 128 * 16 * 8);
  EXPECT_EQ(ModelConfig::desk_scale().flatten_size(), 32 * 2 * 1);
}

TEST(ModelConfig, ValidationErrors) {
  ModelConfig c;
  c.input_width = 500;
  EXPECT_THROW(c.validate(), SpecError);
  c = {};
  c.conv_channels.pop_back();
  EXPECT_THROW(c.validate(), SpecError);
  c = {};
  c.fc_dims.back() = 3;
  EXPECT_THROW(c.validate(), SpecError);
  c = {};
  c.channel_scale = {0, 1};
  EXPECT_THROW(c.validate(), SpecError);
}

TEST(ModelConfig, JsonRoundTrip) {
  const auto c = ModelConfig::desk_scale();
  EXPECT_EQ(model_config_from_json(to_json(c)), c);
}

TEST(GlitchNet, ParameterCountMatchesShapeWalk) {
  const GlitchNet full(ModelConfig{}, 1);
  EXPECT_EQ(full.parameter_count(),
            count_parameters({16, 16, 16, 16, 32, 32, 64, 64, 128, 128}, 16384, {1024, 256, 64, 2}));
  const GlitchNet desk(ModelConfig::desk_scale(), 1);
  EXPECT_EQ(desk.parameter_count(), count_parameters({4, 4, 4, 4, 8, 8, 16, 16, 32, 32}, 64, {1024, 256, 64, 2}));
}

TEST(GlitchNet, OutputShapeIsBatchByClasses) {
  const GlitchNet net(ModelConfig::desk_scale(), 3);
  for (std::size_t n : {1u, 3u}) {
    const auto x = testing_support::random_tensor(n, {n, 3, 32, 64});
    EXPECT_EQ(net.logits(Var(x)).shape(), (Shape{n, 2}));
  }
}

TEST(GlitchNet, InitialLogitsNearZero) {
  const GlitchNet net(ModelConfig::desk_scale(), 5);
  const auto p = predict(net, random_image(5, 64, 32));
  EXPECT_NEAR(p.probabilities[0], 0.5, 0.05);
}

TEST(GlitchNet, SameSeedSameWeights) {
  const GlitchNet a(ModelConfig::desk_scale(), 9), b(ModelConfig::desk_scale(), 9), c(ModelConfig::desk_scale(), 10);
  EXPECT_EQ(serialize_checkpoint(a), serialize_checkpoint(b));
  EXPECT_NE(serialize_checkpoint(a), serialize_checkpoint(c));
}

TEST(GlitchNet, RejectsMissingAndMisshapedTensors) {
  const GlitchNet net(ModelConfig::desk_scale(), 1);
  auto tensors = net.tensors();
  tensors.pop_back();
  EXPECT_THROW(GlitchNet(ModelConfig::desk_scale(), tensors), ModelError);
  tensors = net.tensors();
  tensors[0].value = Tensor::zeros({1});
  EXPECT_THROW(GlitchNet(ModelConfig::desk_scale(), tensors), ModelError);
  tensors = net.tensors();
  tensors.push_back(tensors[0]);
  EXPECT_THROW(GlitchNet(ModelConfig::desk_scale(), tensors), ModelError);
}

TEST(Preprocess, WhiteImageIsOne) {
  const Tensor t = preprocess(ImageRGB(100, 37, {255, 255, 255}), 64, 32);
  for (float v : t.data()) EXPECT_FLOAT_EQ(v, 1.0f);
}

TEST(Preprocess, TargetSizeIsIdentity) {
  const ImageRGB img = random_image(3, 64, 32);
  const Tensor t = preprocess(img, 64, 32);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 64; ++x) {
        const Rgb p = img.at(x, y);
        const std::uint8_t v = c == 0 ? p.r : c == 1 ? p.g : p.b;
        ASSERT_FLOAT_EQ(t[(c * 32 + y) * 64 + x], v / 255.0f);
      }
}

TEST(Preprocess, VerticalImageIsRotatedClockwise) {
  // 32x64 portrait; rotating clockwise moves its bottom-left pixel to the top-left.
  ImageRGB img(32, 64, {0, 0, 0});
  img.set(0, 63, {255, 0, 0});
  const Tensor t = preprocess(img, 64, 32);
  EXPECT_EQ(t.shape(), (Shape{1, 3, 32, 64}));
  EXPECT_FLOAT_EQ(t[0], 1.0f);
  EXPECT_THROW(preprocess(ImageRGB(), 64, 32), std::invalid_argument);
}

TEST(Predict, ProbabilitiesSumToOne) {
  const GlitchNet net(ModelConfig::desk_scale(), 4);
  for (int i = 0; i < 5; ++i) {
    const auto p = predict(net, random_image(40 + i, 80, 50));
    EXPECT_NEAR(p.probabilities[0] + p.probabilities[1], 1.0, 1e-6);
  }
}

TEST(Predict, TieGoesToNormal) {
  EXPECT_EQ(predict(ConstantDetector({0.3f, 0.3f}), ImageRGB(8, 4)).label, Label::kNormal);
  EXPECT_EQ(predict(ConstantDetector({0.3f, 0.31f}), ImageRGB(8, 4)).label, Label::kGlitch);
}

TEST(Checkpoint, RoundTripIsBitwise) {
  TempDir dir("ckpt");
  const GlitchNet net(ModelConfig::desk_scale(), 11);
  save_checkpoint(dir / "m.glib", net);
  const GlitchNet back = load_checkpoint(dir / "m.glib");
  EXPECT_EQ(back.config(), net.config());
  ASSERT_EQ(back.tensors().size(), net.tensors().size());
  for (std::size_t i = 0; i < net.tensors().size(); ++i) {
    EXPECT_EQ(back.tensors()[i].name, net.tensors()[i].name);
    EXPECT_TRUE(back.tensors()[i].value.bitwise_equal(net.tensors()[i].value));
  }
}

TEST(Checkpoint, HeaderLayout) {
  const auto bytes = serialize_checkpoint(GlitchNet(ModelConfig::desk_scale(), 1));
  ASSERT_GT(bytes.size(), 12u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "GLIB");
  EXPECT_EQ(bytes[4] | bytes[5] << 8 | bytes[6] << 16 | bytes[7] << 24, 1);
}

TEST(Checkpoint, DistinctErrorCodes) {
  auto bytes = serialize_checkpoint(GlitchNet(ModelConfig::desk_scale(), 1));
  const auto code_of = [](std::vector<std::uint8_t> b) {
    try {
      deserialize_checkpoint(b);
    } catch (const CheckpointError& e) {
      return e.code();
    }
    ADD_FAILURE() << "no error";
    return CheckpointErrorCode::kMalformed;
  };
  EXPECT_EQ(code_of({bytes.begin(), bytes.end() - 7}), CheckpointErrorCode::kTruncated);
  EXPECT_EQ(code_of({bytes.begin(), bytes.begin() + 6}), CheckpointErrorCode::kTruncated);
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(code_of(bad_magic), CheckpointErrorCode::kNotACheckpoint);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_EQ(code_of(bad_version), CheckpointErrorCode::kUnsupportedVersion);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_EQ(code_of(trailing), CheckpointErrorCode::kMalformed);
}

TEST(Checkpoint, MissingFileIsIoError) {
  EXPECT_THROW(load_checkpoint("/nonexistent/model.glib"), IoError);
}

TEST(Train, SingleClassManifestIsDataError) {
  TempDir dir("single");
  auto m = write_toy_set(dir.path(), 2);
  for (auto& r : m.records) r.label = Label::kNormal;
  EXPECT_THROW(train(m, ModelConfig::desk_scale(), {}), DataError);
}

TEST(Train, UnreadableImageNamesPath) {
  TempDir dir("unreadable");
  auto m = write_toy_set(dir.path(), 2);
  m.records[1].image = "missing.png";
  try {
    train(m, ModelConfig::desk_scale(), {});
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("missing.png"), std::string::npos);
  }
}

TEST(Train, DeterministicAndLossDecreases) {
  TempDir dir("train");
  const auto m = write_toy_set(dir.path(), 8);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 8;
  const auto a = train(m, ModelConfig::desk_scale(), cfg);
  const auto b = train(m, ModelConfig::desk_scale(), cfg);
  EXPECT_EQ(serialize_checkpoint(a.model), serialize_checkpoint(b.model));
  EXPECT_NEAR(a.initial_loss, std::log(2.0), 0.05);
  ASSERT_EQ(a.log.size(), 3u);
  EXPECT_LT(a.log.back().loss, a.log.front().loss);
  EXPECT_EQ(a.selected_epoch, 3);
}

TEST(Train, ValidationSelectsBestEpoch) {
  TempDir dir("val");
  const auto m = write_toy_set(dir.path(), 4);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 4;
  const auto r = train(m, ModelConfig::desk_scale(), cfg, &m);
  double best = -1;
  for (const auto& e : r.log) best = std::max(best, *e.val_acc);
  ASSERT_GE(r.selected_epoch, 1);
  EXPECT_EQ(*r.log[r.selected_epoch - 1].val_acc, best);
}

TEST(Train, LabelFlipFlipsPredictions) {
  TempDir dir("flip");
  const auto m = write_toy_set(dir.path(), 4);
  const auto flipped = write_toy_set(dir.path(), 4, true);
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.batch_size = 8;
  const auto a = train(m, ModelConfig::desk_scale(), cfg);
  const auto b = train(flipped, ModelConfig::desk_scale(), cfg);
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const auto img = read_png(m.resolve(m.records[i].image));
    EXPECT_EQ(predict(a.model, img).label, m.records[i].label) << i;
    EXPECT_EQ(predict(b.model, img).label, flipped.records[i].label) << i;
  }
}

TEST(Train, EpochCallbackSeesEveryEpoch) {
  TempDir dir("cb");
  const auto m = write_toy_set(dir.path(), 2);
  TrainConfig cfg;
  cfg.epochs = 2;
  std::vector<int> seen;
  train(m, ModelConfig::desk_scale(), cfg, nullptr, [&](const EpochLog& e) { seen.push_back(e.epoch); });
  EXPECT_EQ(seen, (std::vector<int>{1, 2}));
}

TEST(Train, LogJsonFields) {
  EpochLog e{2, 0.5, 0.75, std::nullopt, std::nullopt};
  const auto j = to_json(e);
  EXPECT_EQ(j["epoch"], 2);
  EXPECT_TRUE(j["val_acc"].is_null());
}

TEST(Train, StopsOnceTrainingAccuracyIsReached) {
  TempDir dir("stop");
  const auto m = write_toy_set(dir.path(), 2);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.stop_at_train_acc = 0.0;
  EXPECT_EQ(train(m, ModelConfig::desk_scale(), cfg).log.size(), 1u);
}
