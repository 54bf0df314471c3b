// SPDX-License-Identifier: Apache-2.0
#include "model/params.hpp"

#include <cmath>

#include "common/error.hpp"

namespace ockm::model {

int ParamStore::add(std::string name, Tensor value, bool trainable, bool per_gaussian) {
  if (index_.count(name) != 0) throw ConfigError("duplicate parameter name " + name);
  Parameter p;
  p.name = name;
  p.grad = Tensor(value.rows, value.cols);
  p.adam_m = Tensor(value.rows, value.cols);
  p.adam_v = Tensor(value.rows, value.cols);
  p.value = std::move(value);
  p.trainable = trainable;
  p.per_gaussian = per_gaussian;
  const int id = static_cast<int>(params_.size());
  index_.emplace(std::move(name), id);
  params_.push_back(std::move(p));
  return id;
}

int ParamStore::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ConfigError("unknown parameter " + name);
  return it->second;
}

Parameter& ParamStore::at(const std::string& name) { return params_[static_cast<std::size_t>(index_of(name))]; }
const Parameter& ParamStore::at(const std::string& name) const {
  return params_[static_cast<std::size_t>(index_of(name))];
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& p : params_) p.grad = Tensor(p.value.rows, p.value.cols);
}

Bound bind(ad::Tape& tape, const ParamStore& store) {
  Bound b;
  b.vars.reserve(store.size());
  for (const auto& p : store.all()) b.vars.push_back(tape.leaf(p.value, p.trainable));
  return b;
}

void collect_grads(const ad::Tape& tape, const Bound& bound, ParamStore& store) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    Parameter& p = store.all()[i];
    const int id = bound.vars[i].id;
    if (p.trainable && tape.has_grad(id))
      p.grad = tape.grad_or_empty(id);
    else
      p.grad = Tensor(p.value.rows, p.value.cols);
  }
}

Tensor xavier(Rng& rng, std::size_t fan_in, std::size_t fan_out, double gain) {
  const double a = gain * std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(fan_in, fan_out);
  for (auto& x : t.data) x = rng.uniform(-a, a);
  return t;
}

}  // namespace ockm::model
