#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace glitch {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// Immutable n-dimensional float32 array, row-major.
///
/// Copies share storage; every op produces a fresh tensor, so sharing is
/// never observable. A rank-0 shape denotes a scalar (one element).
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<float> data);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, float value);
  static Tensor scalar(float value);

  const Shape& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_->size(); }
  std::span<const float> data() const { return *data_; }
  float operator[](std::size_t i) const { return (*data_)[i]; }

  /// The single value of a one-element tensor.
  float item() const;

  /// Same data viewed with another shape of equal element count.
  Tensor reshape(Shape shape) const;

  /// Copy of the data, for building a modified tensor.
  std::vector<float> to_vector() const { return *data_; }

  bool bitwise_equal(const Tensor& other) const;
  bool all_finite() const;

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<float>> data_;
};

}  // namespace glitch
