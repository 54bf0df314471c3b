// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "model/model.hpp"
#include "oracle/dataset.hpp"
#include "train/adam.hpp"
#include "train/losses.hpp"

namespace ockm::train {

struct ScheduleOptions {
  int plateau_window = 200;
  double plateau_rel = 0.01;
  int min_gap = 200;
  double loss_ema = 0.95;

  void validate() const;
};

struct TrainOptions {
  int steps = 2000;
  int batch = 8;
  LossWeights loss;
  AdamOptions adam;
  ScheduleOptions schedule;
  int maintenance_every = 100;
  octree::MaintenanceOptions maintenance;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainState {
  std::uint64_t step = 0;
  std::vector<double> ebar;          // energy EMA per order, index n - 1
  double loss_ema = 0.0;
  bool ema_started = false;
  std::deque<double> ema_history;    // most recent plateau_window + 1 values
  std::uint64_t last_unlock = 0;
  bool next_unlock_depth = false;    // alternates order / depth
  std::vector<double> grad_accum;    // per-Gaussian |dL/d offset| sums
  std::uint64_t grad_count = 0;

  bool operator==(const TrainState&) const = default;
};

struct LossBreakdown {
  double huber = 0.0;
  double mae = 0.0;
  double nmae = 0.0;  // batch MAE / mean |g|
  double ssim = 0.0;  // mean SSIM, the loss uses 1 - ssim
  double causal = 0.0;
  double decay = 0.0;
  double total = 0.0;
};

struct BatchResult {
  ad::Var total;
  LossBreakdown parts;
  std::vector<double> energies;  // e_n, n = 1..orders
};

// Total loss over a batch rendered with prep.orders orders.
BatchResult batch_loss(const model::Model& m, const model::Bound& bound, const model::Prepared& prep,
                       const std::vector<const oracle::QuerySample*>& batch, const LossWeights& w,
                       const std::vector<double>& ebar);

// Relative EMA improvement across the window below the threshold.
bool plateaued(const std::deque<double>& history, const ScheduleOptions& o);

// Applies at most one unlock; returns a description or an empty string.
std::string unlock_schedule(TrainState& state, model::Model& m, const ScheduleOptions& o);

struct StepRecord {
  std::uint64_t step = 0;
  LossBreakdown loss;
  bool skipped = false;
  int active_order = 0;
  int active_depth = 0;
  std::size_t gaussians = 0;
  std::vector<std::string> events;
};

std::string to_json_line(const StepRecord& r);

class Trainer {
 public:
  Trainer(model::Model& m, std::vector<const oracle::QuerySample*> train_set, TrainOptions options,
          TrainState state = {});

  // One optimizer step, then the unlock schedule, then maintenance when due.
  // Throws NumericError when the loss is not finite; parameters are untouched.
  StepRecord step();

  const TrainState& state() const { return state_; }

 private:
  model::Model& model_;
  std::vector<const oracle::QuerySample*> train_;
  TrainOptions opt_;
  TrainState state_;
};

// Fresh state sized for the model.
TrainState initial_state(const model::Model& m);

}  // namespace ockm::train
