#include "glitch/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>

#include "glitch/errors.hpp"

namespace glitch {

ImageRGB::ImageRGB(int width, int height, Rgb fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw std::invalid_argument("ImageRGB: dimensions must be positive, got " + std::to_string(width) + "x" +
                                std::to_string(height));
  }
  pixels_.resize(static_cast<std::size_t>(width) * height * 3);
  for (std::size_t i = 0; i < pixels_.size(); i += 3) {
    pixels_[i] = fill.r;
    pixels_[i + 1] = fill.g;
    pixels_[i + 2] = fill.b;
  }
}

std::size_t GlitchMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits_.begin(), bits_.end(), [](std::uint8_t b) { return b != 0; }));
}

namespace {

struct DecodedPng {
  int width = 0, height = 0;
  std::vector<std::uint8_t> data;
};

DecodedPng decode(const std::filesystem::path& path, png_uint_32 format, int channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open file");
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, raw.data(), raw.size())) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError(path.string(), "not a decodable PNG (" + msg + ")");
  }
  img.format = format;
  DecodedPng out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.data.resize(static_cast<std::size_t>(img.width) * img.height * channels);
  if (!png_image_finish_read(&img, nullptr, out.data.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw IoError(path.string(), "PNG decode failed (" + msg + ")");
  }
  return out;
}

std::vector<std::uint8_t> encode(const std::uint8_t* data, int width, int height, png_uint_32 format) {
  png_image img;
  std::memset(&img, 0, sizeof img);
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, data, 0, nullptr)) {
    throw std::runtime_error(std::string("PNG encode failed: ") + img.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, data, 0, nullptr)) {
    throw std::runtime_error(std::string("PNG encode failed: ") + img.message);
  }
  out.resize(size);
  return out;
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace

ImageRGB read_png(const std::filesystem::path& path) {
  auto png = decode(path, PNG_FORMAT_RGB, 3);
  if (png.width < 1 || png.height < 1) throw IoError(path.string(), "empty image");
  ImageRGB image(png.width, png.height);
  image.bytes() = std::move(png.data);
  return image;
}

std::vector<std::uint8_t> encode_png(const ImageRGB& image) {
  return encode(image.bytes().data(), image.width(), image.height(), PNG_FORMAT_RGB);
}

void write_png(const std::filesystem::path& path, const ImageRGB& image) { write_bytes(path, encode_png(image)); }

GlitchMask read_mask_png(const std::filesystem::path& path) {
  auto png = decode(path, PNG_FORMAT_GRAY, 1);
  GlitchMask mask(png.width, png.height);
  for (int y = 0; y < png.height; ++y) {
    for (int x = 0; x < png.width; ++x) mask.set(x, y, png.data[static_cast<std::size_t>(y) * png.width + x] != 0);
  }
  return mask;
}

void write_mask_png(const std::filesystem::path& path, const GlitchMask& mask) {
  std::vector<std::uint8_t> gray(mask.bits().size());
  std::transform(mask.bits().begin(), mask.bits().end(), gray.begin(),
                 [](std::uint8_t b) { return static_cast<std::uint8_t>(b ? 255 : 0); });
  write_bytes(path, encode(gray.data(), mask.width(), mask.height(), PNG_FORMAT_GRAY));
}

ImageRGB rotate_clockwise(const ImageRGB& image) {
  const int w = image.width(), h = image.height();
  ImageRGB out(h, w);
  // Source (x, y) lands at (h - 1 - y, x).
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.set(h - 1 - y, x, image.at(x, y));
  return out;
}

GlitchMask rotate_clockwise(const GlitchMask& mask) {
  const int w = mask.width(), h = mask.height();
  GlitchMask out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.set(h - 1 - y, x, mask.at(x, y));
  return out;
}

GlitchMask resize_nearest(const GlitchMask& mask, int width, int height) {
  GlitchMask out(width, height);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(mask.height() - 1, static_cast<int>((y + 0.5) * mask.height() / height));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(mask.width() - 1, static_cast<int>((x + 0.5) * mask.width() / width));
      out.set(x, y, mask.at(sx, sy));
    }
  }
  return out;
}

namespace {

struct Tap {
  int i0, i1;
  float w1;  // weight of i1; i0 gets 1 - w1
};

std::vector<Tap> bilinear_taps(int src, int dst) {
  std::vector<Tap> taps(static_cast<std::size_t>(dst));
  const double scale = static_cast<double>(src) / dst;
  for (int i = 0; i < dst; ++i) {
    double s = (i + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, src - 1);
    taps[static_cast<std::size_t>(i)] = {i0, i1, static_cast<float>(s - i0)};
  }
  return taps;
}

}  // namespace

std::vector<float> resize_bilinear(const std::vector<float>& plane, int src_w, int src_h, int width, int height) {
  const auto tx = bilinear_taps(src_w, width);
  const auto ty = bilinear_taps(src_h, height);
  std::vector<float> out(static_cast<std::size_t>(width) * height);
  for (int y = 0; y < height; ++y) {
    const Tap& vy = ty[static_cast<std::size_t>(y)];
    const float* r0 = plane.data() + static_cast<std::size_t>(vy.i0) * src_w;
    const float* r1 = plane.data() + static_cast<std::size_t>(vy.i1) * src_w;
    for (int x = 0; x < width; ++x) {
      const Tap& vx = tx[static_cast<std::size_t>(x)];
      const float top = r0[vx.i0] * (1.0f - vx.w1) + r0[vx.i1] * vx.w1;
      const float bottom = r1[vx.i0] * (1.0f - vx.w1) + r1[vx.i1] * vx.w1;
      out[static_cast<std::size_t>(y) * width + x] = top * (1.0f - vy.w1) + bottom * vy.w1;
    }
  }
  return out;
}

std::vector<float> resize_bilinear_planar(const ImageRGB& image, int width, int height) {
  const int w = image.width(), h = image.height();
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(width) * height * 3);
  std::vector<float> plane(static_cast<std::size_t>(w) * h);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < plane.size(); ++i) plane[i] = image.bytes()[i * 3 + static_cast<std::size_t>(c)];
    auto resized = resize_bilinear(plane, w, h, width, height);
    out.insert(out.end(), resized.begin(), resized.end());
  }
  return out;
}

}  // namespace glitch
