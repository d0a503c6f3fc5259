#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace glitch {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// 8-bit RGB raster, row-major.
class ImageRGB {
 public:
  ImageRGB() = default;
  ImageRGB(int width, int height, Rgb fill = {});

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  Rgb at(int x, int y) const {
    const auto i = index(x, y);
    return {pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    const auto i = index(x, y);
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
  }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  const std::vector<std::uint8_t>& bytes() const { return pixels_; }
  std::vector<std::uint8_t>& bytes() { return pixels_; }

  friend bool operator==(const ImageRGB&, const ImageRGB&) = default;

 private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x)) * 3;
  }
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Per-pixel ground truth: true marks a synthesized glitch pixel.
class GlitchMask {
 public:
  GlitchMask() = default;
  GlitchMask(int width, int height) : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v = true) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  std::size_t count() const;
  double density() const { return bits_.empty() ? 0.0 : static_cast<double>(count()) / bits_.size(); }
  bool empty() const { return count() == 0; }

  const std::vector<std::uint8_t>& bits() const { return bits_; }

  friend bool operator==(const GlitchMask&, const GlitchMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

struct Rect {
  int x = 0, y = 0, w = 0, h = 0;
  int area() const { return w * h; }
  bool contains(int px, int py) const { return px >= x && py >= y && px < x + w && py < y + h; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Decodes any PNG into RGB (alpha is composited onto black). Throws IoError.
ImageRGB read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageRGB& image);
std::vector<std::uint8_t> encode_png(const ImageRGB& image);

/// Masks are stored as 8-bit grayscale, 255 = glitch. Nonzero reads as true.
GlitchMask read_mask_png(const std::filesystem::path& path);
void write_mask_png(const std::filesystem::path& path, const GlitchMask& mask);

/// 90 degree rotations (width and height swap).
ImageRGB rotate_clockwise(const ImageRGB& image);
GlitchMask rotate_clockwise(const GlitchMask& mask);

/// Nearest-neighbour resampling with pixel-center alignment.
GlitchMask resize_nearest(const GlitchMask& mask, int width, int height);

/// Bilinear resampling with pixel-center alignment (half-pixel offsets),
/// clamped at the border. Returns planar float channels [3][height][width]
/// in the 0..255 range.
std::vector<float> resize_bilinear_planar(const ImageRGB& image, int width, int height);

/// Bilinear resampling of a single float plane, same convention.
std::vector<float> resize_bilinear(const std::vector<float>& plane, int src_w, int src_h, int width, int height);

}  // namespace glitch
