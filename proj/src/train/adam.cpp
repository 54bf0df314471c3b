// SPDX-License-Identifier: Apache-2.0
#include "train/adam.hpp"

#include <cmath>

#include "common/error.hpp"

namespace ockm::train {

void AdamOptions::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must be in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

bool adam_step(model::ParamStore& store, std::uint64_t step, const AdamOptions& o) {
  if (step == 0) throw RangeError("Adam steps are 1-based");
  for (const auto& p : store.all()) {
    if (!p.trainable) continue;
    for (double g : p.grad.data)
      if (!std::isfinite(g)) return false;
  }
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(step));
  for (auto& p : store.all()) {
    if (!p.trainable) continue;
    if (!p.grad.same_shape(p.value)) throw DimensionError("gradient shape differs for " + p.name);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      p.adam_m[i] = o.beta1 * p.adam_m[i] + (1.0 - o.beta1) * g;
      p.adam_v[i] = o.beta2 * p.adam_v[i] + (1.0 - o.beta2) * g * g;
      p.value[i] -= o.lr * (p.adam_m[i] / c1) / (std::sqrt(p.adam_v[i] / c2) + o.epsilon);
    }
  }
  return true;
}

}  // namespace ockm::train
