#include "support.hpp"

#include <fstream>
#include <iterator>
#include <stdexcept>

#include "glitch/rng.hpp"

namespace testing_support {

TempDir::TempDir(const std::string& tag) {
  const auto base = std::filesystem::temp_directory_path();
  for (std::uint64_t i = 0;; ++i) {
    path_ = base / ("glitchlens_" + tag + "_" + std::to_string(glitch::mix64(i ^ reinterpret_cast<std::uintptr_t>(this)) % 1000000));
    if (std::filesystem::create_directories(path_)) break;
  }
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

glitch::Tensor random_tensor(std::uint64_t seed, glitch::Shape shape, double scale) {
  glitch::Rng rng(seed);
  std::vector<float> data(glitch::numel(shape));
  for (auto& v : data) v = static_cast<float>(rng.normal() * scale);
  return glitch::Tensor(std::move(shape), std::move(data));
}

glitch::ImageRGB random_image(std::uint64_t seed, int width, int height) {
  glitch::Rng rng(seed);
  glitch::ImageRGB img(width, height);
  const int r0 = rng.uniform_int(0, 255), g0 = rng.uniform_int(0, 255), b0 = rng.uniform_int(0, 255);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      img.set(x, y, {static_cast<std::uint8_t>((r0 + 2 * x) % 256), static_cast<std::uint8_t>((g0 + 3 * y) % 256),
                     static_cast<std::uint8_t>((b0 + x + y) % 256)});
  for (int k = 0; k < 4; ++k) {
    const int w = rng.uniform_int(1, width), h = rng.uniform_int(1, height);
    const int x0 = rng.uniform_int(0, width - w), y0 = rng.uniform_int(0, height - h);
    const glitch::Rgb c{rng.byte(), rng.byte(), rng.byte()};
    for (int y = y0; y < y0 + h; ++y)
      for (int x = x0; x < x0 + w; ++x) img.set(x, y, c);
  }
  return img;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace testing_support
