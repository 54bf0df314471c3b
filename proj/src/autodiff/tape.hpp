// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "autodiff/tensor.hpp"

namespace ockm::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
  double item() const;
};

// Append-only record of a forward pass. Nodes are stored in creation order,
// which is a topological order, and backward() walks them in exact reverse.
//
// A backward rule reads grad(self) and accumulates into grad(parent) for each
// parent that requires a gradient. Grad buffers are allocated lazily.
class Tape {
 public:
  using Backward = std::function<void(Tape&, int self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var constant(double v) { return leaf(Tensor::scalar(v), false); }

  // Registers a computed node. It requires a gradient iff any parent does;
  // otherwise the backward rule is dropped.
  Var record(Tensor value, std::initializer_list<Var> parents, Backward fn);
  Var record(Tensor value, const std::vector<Var>& parents, Backward fn);

  const Tensor& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  Tensor& grad(int id);
  const Tensor& grad_or_empty(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  bool has_grad(int id) const { return !nodes_[static_cast<std::size_t>(id)].grad.empty(); }

  // Reverse accumulation from a scalar root. A second call without reset()
  // throws.
  void backward(Var loss);
  void reset();

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Backward fn;
  };
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace ockm::ad
