// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "config/run_config.hpp"
#include "model/model.hpp"
#include "train/trainer.hpp"

namespace ockm::train {

inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
  config::RunConfig config;
  std::unique_ptr<model::Model> model;
  TrainState state;
};

// Layout: "OCKM", u16 version, u64 FNV-1a of the config text, config text,
// topology snapshot, active depth/order, train state, then one block per
// parameter (name, rows, cols, flags, value, Adam m, Adam v). Little-endian.
std::vector<std::uint8_t> encode_checkpoint(const config::RunConfig& cfg, const model::Model& m,
                                            const TrainState& state);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

// Writes to a temporary file first, then renames over the target.
void save_checkpoint(const std::string& path, const config::RunConfig& cfg, const model::Model& m,
                     const TrainState& state);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ockm::train
