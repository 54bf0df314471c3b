// SPDX-License-Identifier: Apache-2.0
#include "autodiff/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "common/rng.hpp"

namespace ockm::ad {

std::string GradCheckReport::summary() const {
  std::ostringstream os;
  os.precision(3);
  for (const auto& e : entries) {
    os << e.name << ": n=" << e.coords_checked << " max_rel=" << std::scientific << e.max_rel_error;
    if (e.coords_checked > 0) {
      os << " (idx " << e.worst_index << " analytic=" << e.worst_analytic << " numeric=" << e.worst_numeric << ")";
    }
    if (!e.finite) os << " NON-FINITE";
    os << "\n";
  }
  return os.str();
}

GradCheckReport grad_check(const LossFn& fn, const std::vector<GradParam>& params, const GradCheckOptions& opts) {
  GradCheckReport report;
  const double base = fn(true);
  if (!std::isfinite(base)) report.finite = false;

  // Snapshot analytic gradients before any further evaluation overwrites them.
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(*p.grad);

  Rng rng(opts.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    const GradParam& p = params[pi];
    GradCheckEntry entry;
    entry.name = p.name;
    const std::size_t n = p.value->size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (n > opts.max_coords) {
      // Partial Fisher-Yates for a reproducible subsample.
      for (std::size_t i = 0; i < opts.max_coords; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(coords[i], coords[j]);
      }
      coords.resize(opts.max_coords);
      std::sort(coords.begin(), coords.end());
    }
    for (std::size_t c : coords) {
      double& x = (*p.value)[c];
      const double saved = x;
      x = saved + opts.step;
      const double fp = fn(false);
      x = saved - opts.step;
      const double fm = fn(false);
      x = saved;
      const double numeric = (fp - fm) / (2.0 * opts.step);
      const double a = analytic[pi][c];
      if (!std::isfinite(numeric) || !std::isfinite(a)) {
        entry.finite = false;
        report.finite = false;
        continue;
      }
      const double denom = std::max({std::fabs(a), std::fabs(numeric), opts.denominator_floor});
      const double rel = std::fabs(a - numeric) / denom;
      if (rel > entry.max_rel_error || entry.coords_checked == 0) {
        entry.max_rel_error = std::max(entry.max_rel_error, rel);
        entry.worst_index = c;
        entry.worst_analytic = a;
        entry.worst_numeric = numeric;
      }
      ++entry.coords_checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  // Leave analytic gradients in place for the caller.
  for (std::size_t pi = 0; pi < params.size(); ++pi) *params[pi].grad = analytic[pi];
  return report;
}

}  // namespace ockm::ad
