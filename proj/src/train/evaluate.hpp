// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "model/model.hpp"
#include "oracle/dataset.hpp"

namespace ockm::train {

struct SampleEval {
  double frequency = 0.0;
  double pred_db = 0.0;
  double target_db = 0.0;
  double ssim = 0.0;
};

struct FrequencyRow {
  double frequency = 0.0;
  std::size_t count = 0;
  double mae = 0.0;
  double nmae = 0.0;
  double ssim_mean = 0.0;
};

struct EvalReport {
  std::size_t count = 0;
  double mae = 0.0;   // dB
  double nmae = 0.0;  // MAE / mean |g|
  double ssim_mean = 0.0;
  double ssim_median = 0.0;
  std::vector<FrequencyRow> per_frequency;  // ascending frequency
  // Model-only diagnostics (empty for plain metric reports).
  std::vector<double> order_energy;  // mean ||h^n||^2, n = 1..orders
  double causal_fraction = 1.0;      // Gaussians meeting every order margin
  std::vector<SampleEval> samples;
};

// Metrics from predicted and target gains and spectra (linear power).
EvalReport metric_report(const std::vector<double>& freqs, const std::vector<double>& pred_db,
                         const std::vector<double>& target_db, const std::vector<std::vector<double>>& pred_spec,
                         const std::vector<std::vector<double>>& target_spec, int V, int Z);

// Renders every sample with the model's active order count.
EvalReport evaluate(const model::Model& m, const std::vector<const oracle::QuerySample*>& samples, double delta_d);

std::string report_json(const EvalReport& r);

struct Component {
  std::string name;  // "los", "order1", ..., "total"
  double gain_db = 0.0;
  std::vector<double> spectrum;  // V x Z row-major, linear power
};

// LoS, orders 1..orders, then their sum. orders <= active order.
std::vector<Component> render_components(const model::Model& m, const render::Query& q, int orders);

}  // namespace ockm::train
