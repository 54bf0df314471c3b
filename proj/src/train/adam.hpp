// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "model/params.hpp"

namespace ockm::train {

struct AdamOptions {
  double lr = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

// Bias-corrected Adam on every trainable parameter; step is 1-based. Returns
// false and leaves everything untouched if any gradient is non-finite.
bool adam_step(model::ParamStore& store, std::uint64_t step, const AdamOptions& opts);

}  // namespace ockm::train
