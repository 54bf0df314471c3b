// SPDX-License-Identifier: Apache-2.0
#include "autodiff/tape.hpp"

#include <algorithm>

namespace ockm::ad {

const Tensor& Var::value() const { return tape->value(id); }

const Tensor& Var::grad() const { return tape->grad(id); }

double Var::item() const {
  const Tensor& v = value();
  if (v.size() != 1) throw DimensionError("item() on non-scalar of shape " + v.shape_string());
  return v[0];
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), Tensor{}, requires_grad, nullptr});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, Backward fn) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape != this) throw ConfigError("operand belongs to a different tape");
    needs = needs || requires_grad(p.id);
  }
  nodes_.push_back(Node{std::move(value), Tensor{}, needs, needs ? std::move(fn) : nullptr});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, const std::vector<Var>& parents, Backward fn) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape != this) throw ConfigError("operand belongs to a different tape");
    needs = needs || requires_grad(p.id);
  }
  nodes_.push_back(Node{std::move(value), Tensor{}, needs, needs ? std::move(fn) : nullptr});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Tensor& Tape::grad(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.rows, n.value.cols, 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ConfigError("backward root belongs to a different tape");
  if (backward_done_) throw ConfigError("backward called twice on the same tape without reset");
  if (value(loss.id).size() != 1) {
    throw DimensionError("backward root must be scalar, got " + value(loss.id).shape_string());
  }
  backward_done_ = true;
  grad(loss.id)[0] = 1.0;
  for (int i = loss.id; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.fn || n.grad.empty()) continue;
    n.fn(*this, i);
  }
}

void Tape::reset() {
  nodes_.clear();
  backward_done_ = false;
}

}  // namespace ockm::ad
