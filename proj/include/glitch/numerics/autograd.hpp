#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "glitch/numerics/tensor.hpp"

namespace glitch {

class Tape;

/// A tensor value, optionally tracked on a Tape.
///
/// Untracked Vars are constants: ops on them compute values but record
/// nothing. An op records a node iff at least one input is tracked.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value) : value_(std::move(value)) {}

  const Tensor& value() const { return value_; }
  const Shape& shape() const { return value_.shape(); }
  bool tracked() const { return node_ >= 0; }
  Tape* tape() const { return tape_; }
  int node() const { return node_; }

 private:
  friend class Tape;
  Tensor value_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

/// Gradients produced by one backward pass, keyed by tracked Var.
class Gradients {
 public:
  /// Gradient w.r.t. v; zeros when v did not influence the loss.
  Tensor of(const Var& v) const;

 private:
  friend class Tape;
  const Tape* tape_ = nullptr;
  std::vector<Shape> shapes_;
  std::vector<std::vector<float>> grads_;
};

/// Records differentiable ops in execution order and runs reverse mode.
///
/// A tape supports exactly one backward pass; afterwards it is consumed and
/// any further recording or backward call throws std::logic_error.
class Tape {
 public:
  /// Propagates the output gradient into the inputs' buffers via grad().
  using BackwardFn = std::function<void(std::span<const float> grad_out, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a leaf whose gradient will be reported.
  Var variable(Tensor value);

  /// Records an op output. Returns an untracked Var when no input is tracked,
  /// in which case `backward` is dropped.
  static Var record(Tensor output, std::initializer_list<const Var*> inputs, BackwardFn backward);

  /// Gradient accumulation buffer of a node, zero-filled on first access.
  std::span<float> grad(int node);

  Gradients backward(const Var& loss);

  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    BackwardFn backward;
  };

  Var push(Tensor value, BackwardFn backward);

  std::vector<Node> nodes_;
  std::vector<std::vector<float>> grads_;
  bool consumed_ = false;
};

}  // namespace glitch
