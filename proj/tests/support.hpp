#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "glitch/image.hpp"
#include "glitch/numerics/tensor.hpp"

namespace testing_support {

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

glitch::Tensor random_tensor(std::uint64_t seed, glitch::Shape shape, double scale = 1.0);

/// Smooth random image: per-channel gradients plus a few rectangles.
glitch::ImageRGB random_image(std::uint64_t seed, int width, int height);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

}  // namespace testing_support
