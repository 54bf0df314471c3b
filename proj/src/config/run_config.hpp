// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "model/model.hpp"
#include "oracle/dataset.hpp"
#include "train/trainer.hpp"

namespace ockm::config {

struct DataSection {
  std::vector<double> frequencies_ghz{2.4, 6.0, 10.0};
  int train = 64;
  int test = 16;
  int grid_v = 18;
  int grid_z = 36;
  int array_rows = 4;
  int array_cols = 4;
  std::size_t max_draws = 100000;
};

struct ModelSection {
  int start_depth = 2;
  int max_depth = 3;
  int start_order = 1;
  int max_order = 3;
  int feature_dim = 32;
  int heads = 2;
  int hidden = 32;
  int mlp_width = 64;
  int mlp_blocks = 3;
  int directions = 64;
  double init_opacity_raw = -3.0;
  double init_scale_fraction = 0.25;
  double feature_init_std = 0.3;
  double output_gain = 0.1;
};

struct ScheduleSection {
  int steps = 2000;  // total step target, resumed runs included
  int batch = 8;
  int plateau_window = 200;
  double plateau_rel = 0.01;
  int min_gap = 200;
  double loss_ema = 0.95;
  int maintenance_every = 100;
  double prune_threshold = 0.005;
  double grad_percentile = 0.9;
  std::size_t max_gaussians = 96;
  int eval_every = 0;  // 0 disables periodic held-out evaluation
};

struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  oracle::RoomSpec room;  // room.max_order is the oracle bounce count
  DataSection data;
  ModelSection model;
  train::LossWeights loss;
  train::AdamOptions optimizer;
  ScheduleSection schedule;

  void validate() const;
};

// Strict: unknown keys and wrong types throw ConfigError. Missing keys keep
// their defaults.
RunConfig from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);

RunConfig load_config(const std::string& path);
RunConfig parse_config(const std::string& text);
std::string dump_config(const RunConfig& c);  // canonical, pretty

// Octree bounds: cube at the origin with edge = largest room extent.
model::ModelConfig model_config(const RunConfig& c);
oracle::GenerateOptions generate_options(const RunConfig& c);
train::TrainOptions train_options(const RunConfig& c);

std::uint64_t fnv1a(const std::string& text);

}  // namespace ockm::config
