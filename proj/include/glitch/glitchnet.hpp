#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "glitch/errors.hpp"
#include "glitch/image.hpp"
#include "glitch/manifest.hpp"
#include "glitch/numerics/autograd.hpp"
#include "glitch/numerics/ops.hpp"

namespace glitch {

/// Positive rational multiplier applied to every conv channel count.
struct ChannelScale {
  int num = 1;
  int den = 1;
  friend bool operator==(const ChannelScale&, const ChannelScale&) = default;
};

struct ModelConfig {
  int input_width = 512;
  int input_height = 256;
  int num_classes = 2;
  std::vector<int> conv_channels{16, 16, 16, 16, 32, 32, 64, 64, 128, 128};
  std::vector<int> pool_after{2, 4, 6, 8, 10};  // 1-based conv indices
  std::vector<int> fc_dims{1024, 256, 64, 2};
  ChannelScale channel_scale{};

  /// 64x32 input with a quarter of the channels: fast enough for CPU tests.
  static ModelConfig desk_scale();

  /// Throws SpecError when the layout is inconsistent.
  void validate() const;
  std::vector<int> scaled_channels() const;
  int feature_width() const;
  int feature_height() const;
  int flatten_size() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);

struct TrainConfig {
  int batch_size = 16;
  float learning_rate = 1e-3f;
  int epochs = 30;
  std::uint64_t seed = 42;
  bool shuffle = true;
  /// Ends training early once inference-mode training accuracy reaches this value.
  std::optional<double> stop_at_train_acc;
};

/// Anything that maps a preprocessed batch [N,3,H,W] to logits [N,K].
class Detector {
 public:
  virtual ~Detector() = default;
  virtual int input_width() const = 0;
  virtual int input_height() const = 0;
  virtual int num_classes() const = 0;
  /// Inference-mode forward pass. Must not modify the detector, so it is
  /// safe to call concurrently.
  virtual Var logits(const Var& input) const = 0;
};

struct NamedTensor {
  std::string name;
  Tensor value;
};

/// The 10-conv / 5-pool / 4-FC glitch classifier.
///
///   for i in 1..10: conv3x3 -> batchnorm -> ReLU, maxpool(2,2) after pool_after
///   flatten -> FC -> ReLU -> FC -> ReLU -> FC -> ReLU -> FC (logits)
class GlitchNet final : public Detector {
 public:
  /// Fresh weights: He-normal convs and FCs, zero biases, gamma 1, beta 0.
  /// The output layer's He draw is scaled by kOutputInitScale so initial
  /// logits sit near zero.
  GlitchNet(ModelConfig config, std::uint64_t seed);

  /// Rebuilds from named tensors; throws ModelError if any tensor is missing,
  /// duplicated, unexpected or mis-shaped.
  GlitchNet(ModelConfig config, std::vector<NamedTensor> tensors);

  static constexpr float kOutputInitScale = 0.01f;

  const ModelConfig& config() const { return config_; }
  const std::vector<NamedTensor>& tensors() const { return tensors_; }

  int input_width() const override { return config_.input_width; }
  int input_height() const override { return config_.input_height; }
  int num_classes() const override { return config_.num_classes; }
  Var logits(const Var& input) const override;

  /// Indices into tensors() of the trainable tensors (everything except
  /// batchnorm running statistics).
  const std::vector<std::size_t>& trainable() const { return trainable_; }
  std::size_t parameter_count() const;

  /// Training-mode forward: `params` are Vars for trainable() in order;
  /// batchnorm running statistics are updated in place.
  Var forward_train(const Var& input, std::span<const Var> params);

  void set_tensor(std::size_t index, Tensor value);

 private:
  struct ConvLayer {
    std::size_t weight, bias, gamma, beta, running_mean, running_var;
    bool pool;
  };
  struct FcLayer {
    std::size_t weight, bias;
  };

  void build_layout();
  std::vector<std::pair<std::string, Shape>> expected_shapes() const;
  // Training mode iff train_stats is non-null; it then receives the
  // updated running statistics, one entry per conv layer.
  Var forward(const Var& input, const std::function<Var(std::size_t)>& param,
              std::vector<nn::BatchNormStats>* train_stats) const;

  ModelConfig config_;
  std::vector<NamedTensor> tensors_;
  std::vector<ConvLayer> convs_;
  std::vector<FcLayer> fcs_;
  std::vector<std::size_t> trainable_;
  std::vector<int> trainable_position_;
};

/// Rotates vertical images clockwise, stretch-resizes bilinearly to
/// width x height and scales to [0,1]. Returns [1,3,height,width].
Tensor preprocess(const ImageRGB& image, int width, int height);

/// Stacks [1,3,H,W] tensors into [N,3,H,W].
Tensor stack_batch(std::span<const Tensor> items);

struct Prediction {
  Label label = Label::kNormal;
  std::vector<float> probabilities;
  float p_glitch() const { return probabilities.size() > 1 ? probabilities[1] : 0.0f; }
};

/// Softmax probabilities and argmax label; exact ties go to class 0.
Prediction predict(const Detector& detector, const ImageRGB& image);
Prediction predict_tensor(const Detector& detector, const Tensor& input);

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  double train_acc = 0.0;
  std::optional<double> val_acc;
  std::optional<double> val_loss;
};

nlohmann::json to_json(const EpochLog& log);

struct TrainResult {
  GlitchNet model;
  std::vector<EpochLog> log;
  /// Mean cross-entropy over the training set before any update.
  double initial_loss = 0.0;
  /// Epoch whose weights were returned (0 = initialization).
  int selected_epoch = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

/// Mini-batch Adam training on cross-entropy.
///
/// All randomness (initialization, shuffling) derives from train_cfg.seed.
/// With a validation manifest the epoch with the best validation accuracy
/// (ties: lower validation loss, then earlier epoch) is returned, else the
/// final epoch. Throws DataError for single-class data and IoError naming
/// the path for unreadable images.
TrainResult train(const DatasetManifest& train_set, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const DatasetManifest* validation = nullptr, const EpochCallback& on_epoch = {});

/// Loads and preprocesses every image of a manifest.
std::vector<Tensor> load_inputs(const DatasetManifest& manifest, int width, int height);

// Checkpoint file: "GLIB", u32 version, u32-length JSON config block, then
// per tensor: u16 name length, name, u8 ndim, u32 dims, f32 data (all LE).

enum class CheckpointErrorCode { kNotACheckpoint, kUnsupportedVersion, kTruncated, kMalformed, kArchitectureMismatch };

class CheckpointError : public ModelError {
 public:
  CheckpointError(CheckpointErrorCode code, const std::string& what) : ModelError(what), code_(code) {}
  CheckpointErrorCode code() const { return code_; }

 private:
  CheckpointErrorCode code_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const GlitchNet& model);
GlitchNet deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const GlitchNet& model);
GlitchNet load_checkpoint(const std::filesystem::path& path);

}  // namespace glitch
