#include "glitch/numerics/tensor.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace glitch {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor() : shape_{}, data_(std::make_shared<const std::vector<float>>(1, 0.0f)) {}

Tensor::Tensor(Shape shape, std::vector<float> data) : shape_(std::move(shape)) {
  for (auto d : shape_) {
    if (d == 0) throw std::invalid_argument("Tensor: zero-sized dimension in " + to_string(shape_));
  }
  if (numel(shape_) != data.size()) {
    throw std::invalid_argument("Tensor: shape " + to_string(shape_) + " needs " +
                                std::to_string(numel(shape_)) + " elements, got " +
                                std::to_string(data.size()));
  }
  data_ = std::make_shared<const std::vector<float>>(std::move(data));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0f); }

Tensor Tensor::full(Shape shape, float value) {
  const auto n = numel(shape);
  return Tensor(std::move(shape), std::vector<float>(n, value));
}

Tensor Tensor::scalar(float value) { return Tensor({}, {value}); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw std::out_of_range("Tensor::dim: axis " + std::to_string(axis) + " of shape " + to_string(shape_));
  }
  return shape_[axis];
}

float Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("Tensor::item on shape " + to_string(shape_));
  return (*data_)[0];
}

Tensor Tensor::reshape(Shape shape) const {
  if (numel(shape) != size()) {
    throw std::invalid_argument("Tensor::reshape " + to_string(shape_) + " -> " + to_string(shape));
  }
  Tensor out = *this;
  out.shape_ = std::move(shape);
  return out;
}

bool Tensor::bitwise_equal(const Tensor& other) const {
  return shape_ == other.shape_ &&
         std::memcmp(data_->data(), other.data_->data(), size() * sizeof(float)) == 0;
}

bool Tensor::all_finite() const {
  for (float v : *data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace glitch
