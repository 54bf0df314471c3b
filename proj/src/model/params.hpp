// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "autodiff/ops.hpp"
#include "common/rng.hpp"

namespace ockm::model {

using ad::Tensor;
using ad::Var;

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor adam_m;
  Tensor adam_v;
  bool trainable = true;
  bool per_gaussian = false;  // rows follow the Gaussian index
};

// Named parameters in insertion order. Names are stable across runs and are
// the checkpoint keys.
class ParamStore {
 public:
  int add(std::string name, Tensor value, bool trainable = true, bool per_gaussian = false);
  Parameter& operator[](int i) { return params_[static_cast<std::size_t>(i)]; }
  const Parameter& operator[](int i) const { return params_[static_cast<std::size_t>(i)]; }
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  int index_of(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t size() const { return params_.size(); }
  std::vector<Parameter>& all() { return params_; }
  const std::vector<Parameter>& all() const { return params_; }

  std::size_t scalar_count() const;
  void zero_grads();

 private:
  std::vector<Parameter> params_;
  std::unordered_map<std::string, int> index_;
};

// Parameter values as tape leaves, indexed like the store.
struct Bound {
  std::vector<Var> vars;
  Var operator[](int i) const { return vars[static_cast<std::size_t>(i)]; }
};

Bound bind(ad::Tape& tape, const ParamStore& store);
// Copies tape gradients into Parameter::grad (zeros where none reached).
void collect_grads(const ad::Tape& tape, const Bound& bound, ParamStore& store);

// Uniform(-a, a) with a = gain * sqrt(6 / (fan_in + fan_out)).
Tensor xavier(Rng& rng, std::size_t fan_in, std::size_t fan_out, double gain = 1.0);

}  // namespace ockm::model
