#include "glitch/numerics/autograd.hpp"

#include <stdexcept>

namespace glitch {

Tensor Gradients::of(const Var& v) const {
  if (!v.tracked() || v.tape() != tape_) {
    throw std::invalid_argument("Gradients::of: variable was not recorded on this tape");
  }
  const auto id = static_cast<std::size_t>(v.node());
  if (grads_[id].empty()) return Tensor::zeros(shapes_[id]);
  return Tensor(shapes_[id], grads_[id]);
}

Var Tape::push(Tensor value, BackwardFn backward) {
  if (consumed_) throw std::logic_error("Tape: recording on a consumed tape");
  nodes_.push_back(Node{value.shape(), std::move(backward)});
  grads_.emplace_back();
  Var v(std::move(value));
  v.tape_ = this;
  v.node_ = static_cast<int>(nodes_.size() - 1);
  return v;
}

Var Tape::variable(Tensor value) { return push(std::move(value), nullptr); }

Var Tape::record(Tensor output, std::initializer_list<const Var*> inputs, BackwardFn backward) {
  Tape* tape = nullptr;
  for (const Var* in : inputs) {
    if (!in->tracked()) continue;
    if (tape && tape != in->tape()) throw std::logic_error("Tape: op mixes variables from different tapes");
    tape = in->tape();
  }
  if (!tape) return Var(std::move(output));
  return tape->push(std::move(output), std::move(backward));
}

std::span<float> Tape::grad(int node) {
  auto& g = grads_.at(static_cast<std::size_t>(node));
  if (g.empty()) g.assign(numel(nodes_[static_cast<std::size_t>(node)].shape), 0.0f);
  return g;
}

Gradients Tape::backward(const Var& loss) {
  if (consumed_) throw std::logic_error("Tape::backward: tape already consumed");
  if (!loss.tracked() || loss.tape() != this) {
    throw std::invalid_argument("Tape::backward: loss was not recorded on this tape");
  }
  if (loss.value().size() != 1) {
    throw std::invalid_argument("Tape::backward: loss must be a scalar, got shape " + to_string(loss.shape()));
  }
  consumed_ = true;
  grad(loss.node())[0] = 1.0f;
  for (int i = loss.node(); i >= 0; --i) {
    const auto idx = static_cast<std::size_t>(i);
    if (grads_[idx].empty() || !nodes_[idx].backward) continue;
    // The closure may only touch buffers of earlier nodes, so this view
    // stays valid while it runs.
    nodes_[idx].backward(std::span<const float>(grads_[idx]), *this);
  }
  Gradients out;
  out.tape_ = this;
  out.shapes_.reserve(nodes_.size());
  for (auto& n : nodes_) out.shapes_.push_back(n.shape);
  out.grads_ = std::move(grads_);
  grads_.clear();
  nodes_.clear();
  return out;
}

}  // namespace glitch
