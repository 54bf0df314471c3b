// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "autodiff/tensor.hpp"

namespace ockm::ad {

// One parameter class under test: the value the loss reads and the buffer the
// loss writes its analytic gradient into.
struct GradParam {
  std::string name;
  Tensor* value = nullptr;
  Tensor* grad = nullptr;
};

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t max_coords = 200;  // per parameter class
  std::uint64_t seed = 1;
  // Relative errors divide by max(|analytic|, |numeric|, denominator_floor).
  double denominator_floor = 1e-8;
};

struct GradCheckEntry {
  std::string name;
  std::size_t coords_checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool finite = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool finite = true;

  bool passed(double tol) const { return finite && max_rel_error < tol; }
  std::string summary() const;
};

// Evaluates the loss at the current parameter values. When with_grad is set
// it must also overwrite every GradParam::grad with the analytic gradient.
using LossFn = std::function<double(bool with_grad)>;

// Central differences (f(x+h) - f(x-h)) / 2h on a seeded random subsample of
// coordinates. Parameter values are restored afterwards.
GradCheckReport grad_check(const LossFn& fn, const std::vector<GradParam>& params, const GradCheckOptions& opts = {});

}  // namespace ockm::ad
