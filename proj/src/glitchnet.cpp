#include "glitch/glitchnet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "glitch/errors.hpp"
#include "glitch/numerics/adam.hpp"
#include "glitch/rng.hpp"

namespace glitch {

ModelConfig ModelConfig::desk_scale() {
  ModelConfig c;
  c.input_width = 64;
  c.input_height = 32;
  c.channel_scale = {1, 4};
  return c;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw SpecError("model config: " + what); };
  if (conv_channels.size() != 10) fail("conv_channels must list 10 layers");
  if (fc_dims.size() != 4) fail("fc_dims must list 4 layers");
  if (num_classes < 1) fail("num_classes must be >= 1");
  if (fc_dims.back() != num_classes) fail("last fc dim must equal num_classes");
  for (int c : conv_channels)
    if (c < 1) fail("conv channel counts must be positive");
  for (int d : fc_dims)
    if (d < 1) fail("fc dims must be positive");
  if (channel_scale.num < 1 || channel_scale.den < 1) fail("channel_scale must be a positive ratio");
  int prev = 0;
  for (int p : pool_after) {
    if (p <= prev || p > 10) fail("pool_after must be strictly increasing conv indices in 1..10");
    prev = p;
  }
  if (input_width < 1 || input_height < 1) fail("input dims must be positive");
  const int factor = 1 << pool_after.size();
  if (input_width % factor != 0 || input_height % factor != 0) {
    fail("input " + std::to_string(input_width) + "x" + std::to_string(input_height) + " is not divisible by " +
         std::to_string(factor) + " (non-integral spatial dims after pooling)");
  }
}

std::vector<int> ModelConfig::scaled_channels() const {
  std::vector<int> out;
  for (int c : conv_channels) out.push_back(std::max(1, c * channel_scale.num / channel_scale.den));
  return out;
}

int ModelConfig::feature_width() const { return input_width >> pool_after.size(); }
int ModelConfig::feature_height() const { return input_height >> pool_after.size(); }
int ModelConfig::flatten_size() const {
  validate();
  return scaled_channels().back() * feature_width() * feature_height();
}

nlohmann::json to_json(const ModelConfig& c) {
  return {
      {"input_width", c.input_width},
      {"input_height", c.input_height},
      {"num_classes", c.num_classes},
      {"conv_channels", c.conv_channels},
      {"pool_after", c.pool_after},
      {"fc_dims", c.fc_dims},
      {"channel_scale", std::to_string(c.channel_scale.num) + "/" + std::to_string(c.channel_scale.den)},
  };
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.input_width = j.value("input_width", c.input_width);
    c.input_height = j.value("input_height", c.input_height);
    c.num_classes = j.value("num_classes", c.num_classes);
    c.conv_channels = j.value("conv_channels", c.conv_channels);
    c.pool_after = j.value("pool_after", c.pool_after);
    if (j.contains("fc_dims")) {
      c.fc_dims = j["fc_dims"].get<std::vector<int>>();
    } else if (!c.fc_dims.empty()) {
      c.fc_dims.back() = c.num_classes;
    }
    if (j.contains("channel_scale")) {
      const auto& s = j["channel_scale"];
      if (s.is_number_integer()) {
        c.channel_scale = {s.get<int>(), 1};
      } else {
        const auto text = s.get<std::string>();
        const auto slash = text.find('/');
        if (slash == std::string::npos) {
          c.channel_scale = {std::stoi(text), 1};
        } else {
          c.channel_scale = {std::stoi(text.substr(0, slash)), std::stoi(text.substr(slash + 1))};
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("model config: ") + e.what());
  } catch (const std::logic_error& e) {
    throw SpecError(std::string("model config: bad channel_scale (") + e.what() + ")");
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const EpochLog& log) {
  nlohmann::json j{{"epoch", log.epoch}, {"loss", log.loss}, {"train_acc", log.train_acc}};
  j["val_acc"] = log.val_acc ? nlohmann::json(*log.val_acc) : nlohmann::json(nullptr);
  if (log.val_loss) j["val_loss"] = *log.val_loss;
  return j;
}

// ---------------------------------------------------------------------------

std::vector<std::pair<std::string, Shape>> GlitchNet::expected_shapes() const {
  std::vector<std::pair<std::string, Shape>> out;
  const auto channels = config_.scaled_channels();
  std::size_t in = 3;
  for (std::size_t i = 0; i < channels.size(); ++i) {
    const auto c = static_cast<std::size_t>(channels[i]);
    const auto conv = "conv" + std::to_string(i + 1);
    const auto bn = "bn" + std::to_string(i + 1);
    out.emplace_back(conv + ".weight", Shape{c, in, 3, 3});
    out.emplace_back(conv + ".bias", Shape{c});
    out.emplace_back(bn + ".gamma", Shape{c});
    out.emplace_back(bn + ".beta", Shape{c});
    out.emplace_back(bn + ".running_mean", Shape{c});
    out.emplace_back(bn + ".running_var", Shape{c});
    in = c;
  }
  in = static_cast<std::size_t>(config_.flatten_size());
  for (std::size_t j = 0; j < config_.fc_dims.size(); ++j) {
    const auto d = static_cast<std::size_t>(config_.fc_dims[j]);
    const auto fc = "fc" + std::to_string(j + 1);
    out.emplace_back(fc + ".weight", Shape{d, in});
    out.emplace_back(fc + ".bias", Shape{d});
    in = d;
  }
  return out;
}

void GlitchNet::build_layout() {
  convs_.clear();
  fcs_.clear();
  trainable_.clear();
  trainable_position_.assign(tensors_.size(), -1);
  const std::set<int> pools(config_.pool_after.begin(), config_.pool_after.end());
  std::size_t t = 0;
  for (std::size_t i = 0; i < config_.conv_channels.size(); ++i, t += 6) {
    convs_.push_back({t, t + 1, t + 2, t + 3, t + 4, t + 5, pools.contains(static_cast<int>(i + 1))});
    for (std::size_t k : {t, t + 1, t + 2, t + 3}) trainable_.push_back(k);
  }
  for (std::size_t j = 0; j < config_.fc_dims.size(); ++j, t += 2) {
    fcs_.push_back({t, t + 1});
    trainable_.push_back(t);
    trainable_.push_back(t + 1);
  }
  for (std::size_t p = 0; p < trainable_.size(); ++p) trainable_position_[trainable_[p]] = static_cast<int>(p);
}

GlitchNet::GlitchNet(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  Rng rng(seed);
  const auto shapes = expected_shapes();
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    const auto& [name, shape] = shapes[i];
    const auto suffix = name.substr(name.find('.') + 1);
    std::vector<float> data(numel(shape), 0.0f);
    if (suffix == "weight") {
      // He-normal: fan_in is every dimension but the first.
      const auto fan_in = numel(shape) / shape[0];
      double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
      if (i + 2 == shapes.size()) stddev *= kOutputInitScale;
      for (auto& v : data) v = static_cast<float>(rng.normal() * stddev);
    } else if (suffix == "gamma" || suffix == "running_var") {
      std::fill(data.begin(), data.end(), 1.0f);
    }
    tensors_.push_back({name, Tensor(shape, std::move(data))});
  }
  build_layout();
}

GlitchNet::GlitchNet(ModelConfig config, std::vector<NamedTensor> tensors) : config_(std::move(config)) {
  try {
    config_.validate();
  } catch (const SpecError& e) {
    throw ModelError(e.what());
  }
  const auto shapes = expected_shapes();
  std::set<std::string> seen;
  for (const auto& t : tensors) {
    if (!seen.insert(t.name).second) throw ModelError("duplicate tensor '" + t.name + "'");
  }
  for (const auto& [name, shape] : shapes) {
    auto it = std::find_if(tensors.begin(), tensors.end(), [&](const NamedTensor& t) { return t.name == name; });
    if (it == tensors.end()) throw ModelError("missing tensor '" + name + "'");
    if (it->value.shape() != shape) {
      throw ModelError("tensor '" + name + "' has shape " + to_string(it->value.shape()) + ", architecture expects " +
                       to_string(shape));
    }
    tensors_.push_back({name, it->value});
  }
  if (tensors.size() != shapes.size()) throw ModelError("checkpoint holds tensors the architecture does not use");
  build_layout();
  for (const auto& conv : convs_) {
    for (float v : tensors_[conv.running_var].value.data()) {
      if (!(v >= 0.0f)) throw ModelError("negative batchnorm running variance in '" + tensors_[conv.running_var].name + "'");
    }
  }
}

std::size_t GlitchNet::parameter_count() const {
  std::size_t n = 0;
  for (auto i : trainable_) n += tensors_[i].value.size();
  return n;
}

void GlitchNet::set_tensor(std::size_t index, Tensor value) {
  if (value.shape() != tensors_.at(index).value.shape()) {
    throw std::invalid_argument("set_tensor: shape mismatch for '" + tensors_[index].name + "'");
  }
  tensors_[index].value = std::move(value);
}

Var GlitchNet::forward(const Var& input, const std::function<Var(std::size_t)>& param,
                       std::vector<nn::BatchNormStats>* train_stats) const {
  const auto& shape = input.shape();
  if (shape.size() != 4 || shape[1] != 3 || shape[2] != static_cast<std::size_t>(config_.input_height) ||
      shape[3] != static_cast<std::size_t>(config_.input_width)) {
    throw std::invalid_argument("GlitchNet: expected input [N,3," + std::to_string(config_.input_height) + "," +
                                std::to_string(config_.input_width) + "], got " + to_string(shape));
  }
  const bool training = train_stats != nullptr;
  if (training) train_stats->clear();
  Var x = input;
  for (const auto& layer : convs_) {
    x = nn::conv2d(x, param(layer.weight), param(layer.bias), {.stride = 1, .padding = 1});
    nn::BatchNormStats stats{tensors_[layer.running_mean].value, tensors_[layer.running_var].value};
    x = nn::batchnorm2d(x, param(layer.gamma), param(layer.beta), stats, training);
    if (training) train_stats->push_back(std::move(stats));
    x = nn::relu(x);
    if (layer.pool) x = nn::maxpool2d(x, 2, 2);
  }
  x = nn::flatten(x);
  for (std::size_t j = 0; j < fcs_.size(); ++j) {
    x = nn::linear(x, param(fcs_[j].weight), param(fcs_[j].bias));
    if (j + 1 < fcs_.size()) x = nn::relu(x);
  }
  return x;
}

Var GlitchNet::logits(const Var& input) const {
  return forward(input, [this](std::size_t i) { return Var(tensors_[i].value); }, nullptr);
}

Var GlitchNet::forward_train(const Var& input, std::span<const Var> params) {
  if (params.size() != trainable_.size()) {
    throw std::invalid_argument("forward_train: expected " + std::to_string(trainable_.size()) + " parameter vars");
  }
  std::vector<nn::BatchNormStats> stats;
  Var out = forward(
      input,
      [&](std::size_t i) {
        const int pos = trainable_position_[i];
        return pos >= 0 ? params[static_cast<std::size_t>(pos)] : Var(tensors_[i].value);
      },
      &stats);
  for (std::size_t l = 0; l < convs_.size(); ++l) {
    tensors_[convs_[l].running_mean].value = std::move(stats[l].running_mean);
    tensors_[convs_[l].running_var].value = std::move(stats[l].running_var);
  }
  return out;
}

// ---------------------------------------------------------------------------

Tensor preprocess(const ImageRGB& image, int width, int height) {
  if (image.empty()) throw std::invalid_argument("preprocess: image has a zero dimension");
  const ImageRGB& upright = image.height() > image.width() ? rotate_clockwise(image) : image;
  auto planes = resize_bilinear_planar(upright, width, height);
  for (auto& v : planes) v /= 255.0f;
  return Tensor({1, 3, static_cast<std::size_t>(height), static_cast<std::size_t>(width)}, std::move(planes));
}

Tensor stack_batch(std::span<const Tensor> items) {
  if (items.empty()) throw std::invalid_argument("stack_batch: empty batch");
  Shape shape = items.front().shape();
  std::vector<float> data;
  data.reserve(items.size() * items.front().size());
  for (const auto& t : items) {
    if (t.shape() != shape) throw std::invalid_argument("stack_batch: mismatched item shapes");
    data.insert(data.end(), t.data().begin(), t.data().end());
  }
  shape[0] *= items.size();
  return Tensor(std::move(shape), std::move(data));
}

Prediction predict_tensor(const Detector& detector, const Tensor& input) {
  const Tensor probs = nn::softmax(detector.logits(Var(input)).value());
  Prediction p;
  p.probabilities.assign(probs.data().begin(), probs.data().begin() + static_cast<std::ptrdiff_t>(probs.dim(1)));
  std::size_t best = 0;
  for (std::size_t k = 1; k < p.probabilities.size(); ++k)
    if (p.probabilities[k] > p.probabilities[best]) best = k;
  p.label = best == 1 ? Label::kGlitch : Label::kNormal;
  return p;
}

Prediction predict(const Detector& detector, const ImageRGB& image) {
  return predict_tensor(detector, preprocess(image, detector.input_width(), detector.input_height()));
}

std::vector<Tensor> load_inputs(const DatasetManifest& manifest, int width, int height) {
  std::vector<Tensor> out;
  out.reserve(manifest.records.size());
  for (const auto& r : manifest.records) out.push_back(preprocess(read_png(manifest.resolve(r.image)), width, height));
  return out;
}

namespace {

struct Scores {
  double mean_loss = 0.0;
  double accuracy = 0.0;
};

Scores score(const GlitchNet& model, const std::vector<Tensor>& inputs, const std::vector<int>& labels,
             std::size_t chunk) {
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < inputs.size(); start += chunk) {
    const auto end = std::min(inputs.size(), start + chunk);
    const std::span<const Tensor> items(inputs.data() + start, end - start);
    const std::span<const int> lab(labels.data() + start, end - start);
    const Var z = model.logits(Var(stack_batch(items)));
    loss += static_cast<double>(nn::cross_entropy(z, lab).value().item()) * static_cast<double>(items.size());
    const auto K = z.value().dim(1);
    for (std::size_t n = 0; n < items.size(); ++n) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < K; ++k)
        if (z.value()[n * K + k] > z.value()[n * K + best]) best = k;
      if (static_cast<int>(best) == lab[n]) ++correct;
    }
  }
  return {loss / static_cast<double>(inputs.size()), static_cast<double>(correct) / static_cast<double>(inputs.size())};
}

std::vector<int> labels_of(const DatasetManifest& m) {
  std::vector<int> out;
  for (const auto& r : m.records) out.push_back(static_cast<int>(r.label));
  return out;
}

}  // namespace

TrainResult train(const DatasetManifest& train_set, const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                  const DatasetManifest* validation, const EpochCallback& on_epoch) {
  if (train_cfg.batch_size < 1) throw SpecError("train: batch_size must be >= 1");
  if (!(train_cfg.learning_rate > 0.0f)) throw SpecError("train: learning_rate must be > 0");
  if (train_cfg.epochs < 0) throw SpecError("train: epochs must be >= 0");
  if (train_set.count(Label::kNormal) == 0 || train_set.count(Label::kGlitch) == 0) {
    throw DataError("train: manifest must contain both normal and glitch records (normal=" +
                    std::to_string(train_set.count(Label::kNormal)) +
                    ", glitch=" + std::to_string(train_set.count(Label::kGlitch)) + ")");
  }
  model_cfg.validate();

  const auto inputs = load_inputs(train_set, model_cfg.input_width, model_cfg.input_height);
  const auto labels = labels_of(train_set);
  std::vector<Tensor> val_inputs;
  std::vector<int> val_labels;
  if (validation && !validation->records.empty()) {
    val_inputs = load_inputs(*validation, model_cfg.input_width, model_cfg.input_height);
    val_labels = labels_of(*validation);
  }
  const auto chunk = static_cast<std::size_t>(std::max(train_cfg.batch_size, 32));

  TrainResult result{GlitchNet(model_cfg, derive_seed(train_cfg.seed, "init")), {}, 0.0, 0};
  GlitchNet& model = result.model;
  result.initial_loss = score(model, inputs, labels, chunk).mean_loss;

  AdamState adam;
  adam.learning_rate = train_cfg.learning_rate;
  Rng shuffle_rng(derive_seed(train_cfg.seed, "shuffle"));

  std::optional<std::vector<NamedTensor>> best;
  double best_acc = -1.0, best_loss = 0.0;

  std::vector<std::size_t> order(inputs.size());
  for (int epoch = 1; epoch <= train_cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    if (train_cfg.shuffle)
      for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double epoch_loss = 0.0;
    const auto bs = static_cast<std::size_t>(train_cfg.batch_size);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const auto end = std::min(order.size(), start + bs);
      std::vector<Tensor> items;
      std::vector<int> batch_labels;
      for (std::size_t k = start; k < end; ++k) {
        items.push_back(inputs[order[k]]);
        batch_labels.push_back(labels[order[k]]);
      }

      Tape tape;
      std::vector<Var> params;
      params.reserve(model.trainable().size());
      for (auto idx : model.trainable()) params.push_back(tape.variable(model.tensors()[idx].value));
      const Var z = model.forward_train(Var(stack_batch(items)), params);
      const Var loss = nn::cross_entropy(z, batch_labels);
      epoch_loss += static_cast<double>(loss.value().item()) * static_cast<double>(items.size());
      const Gradients grads = tape.backward(loss);

      std::vector<Tensor> values, g;
      for (std::size_t p = 0; p < params.size(); ++p) {
        values.push_back(params[p].value());
        g.push_back(grads.of(params[p]));
      }
      adam_step(values, g, adam);
      for (std::size_t p = 0; p < params.size(); ++p) model.set_tensor(model.trainable()[p], std::move(values[p]));
    }

    EpochLog log;
    log.epoch = epoch;
    log.loss = epoch_loss / static_cast<double>(inputs.size());
    log.train_acc = score(model, inputs, labels, chunk).accuracy;
    if (!val_inputs.empty()) {
      const auto v = score(model, val_inputs, val_labels, chunk);
      log.val_acc = v.accuracy;
      log.val_loss = v.mean_loss;
      if (v.accuracy > best_acc || (v.accuracy == best_acc && v.mean_loss < best_loss)) {
        best_acc = v.accuracy;
        best_loss = v.mean_loss;
        best = model.tensors();
        result.selected_epoch = epoch;
      }
    } else {
      result.selected_epoch = epoch;
    }
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
    if (train_cfg.stop_at_train_acc && log.train_acc >= *train_cfg.stop_at_train_acc) break;
  }

  if (best) {
    for (std::size_t i = 0; i < best->size(); ++i) model.set_tensor(i, (*best)[i].value);
  }
  return result;
}

}  // namespace glitch
