#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "glitch/errors.hpp"
#include "glitch/glitchnet.hpp"

namespace glitch {
namespace {

constexpr char kMagic[4] = {'G', 'L', 'I', 'B'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) throw CheckpointError(CheckpointErrorCode::kTruncated, "truncated checkpoint");
  }
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(in_[pos_] | (in_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::string string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(in_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const GlitchNet& model) {
  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kCheckpointVersion);
  nlohmann::json header{{"config", to_json(model.config())}, {"tensor_count", model.tensors().size()}};
  const auto text = header.dump();
  w.u32(static_cast<std::uint32_t>(text.size()));
  w.bytes(text.data(), text.size());
  for (const auto& t : model.tensors()) {
    w.u16(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.u8(static_cast<std::uint8_t>(t.value.ndim()));
    for (auto d : t.value.shape()) w.u32(static_cast<std::uint32_t>(d));
    for (float v : t.value.data()) w.u32(std::bit_cast<std::uint32_t>(v));
  }
  return w.take();
}

GlitchNet deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError(CheckpointErrorCode::kNotACheckpoint, "not a checkpoint (bad magic bytes)");
  }
  Reader r(bytes.subspan(4));
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointErrorCode::kUnsupportedVersion,
                          "unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = r.u32();
  nlohmann::json header;
  ModelConfig config;
  std::size_t count = 0;
  try {
    header = nlohmann::json::parse(r.string(header_len));
    config = model_config_from_json(header.at("config"));
    count = header.at("tensor_count").get<std::size_t>();
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    throw CheckpointError(CheckpointErrorCode::kMalformed, std::string("malformed checkpoint header: ") + e.what());
  }

  std::vector<NamedTensor> tensors;
  for (std::size_t i = 0; i < count; ++i) {
    const auto name = r.string(r.u16());
    const auto ndim = r.u8();
    Shape shape;
    for (int d = 0; d < ndim; ++d) shape.push_back(r.u32());
    const auto n = numel(shape);
    r.need(n * 4);
    std::vector<float> data(n);
    for (auto& v : data) v = std::bit_cast<float>(r.u32());
    try {
      tensors.push_back({name, Tensor(std::move(shape), std::move(data))});
    } catch (const std::invalid_argument& e) {
      throw CheckpointError(CheckpointErrorCode::kMalformed, "tensor '" + name + "': " + e.what());
    }
  }
  if (!r.done()) throw CheckpointError(CheckpointErrorCode::kMalformed, "trailing bytes after last tensor");
  try {
    return GlitchNet(std::move(config), std::move(tensors));
  } catch (const CheckpointError&) {
    throw;
  } catch (const ModelError& e) {
    throw CheckpointError(CheckpointErrorCode::kArchitectureMismatch, std::string("architecture mismatch: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const GlitchNet& model) {
  const auto bytes = serialize_checkpoint(model);
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open checkpoint for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string(), "write failed");
}

GlitchNet load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open checkpoint");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace glitch
