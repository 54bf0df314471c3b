// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "common/rng.hpp"
#include "octree/octree.hpp"

namespace ockm::octree {

// What maintenance needs to know about one Gaussian. Index = gaussian id.
struct GaussianState {
  double opacity = 1.0;   // alpha in (0, 1)
  Vec3 offset;            // raw, unclamped offset
  Vec3 log_scale;
  double grad_norm = 0.0; // window mean of |dL/d offset|
};

struct MaintenanceOptions {
  double prune_threshold = 0.005;
  double grad_percentile = 0.9;
  int active_depth = 1;
  std::size_t max_gaussians = 96;
};

enum class EditKind { Prune, Migrate, Split, Clone, Rejected };

const char* edit_kind_name(EditKind k);

struct Edit {
  EditKind kind = EditKind::Rejected;
  int gaussian = -1;
  NodeKey from;
  NodeKey to;
  Vec3 offset;              // new offset of `gaussian` (Migrate, Split, Clone)
  double log_scale_shift = 0.0;
  int clone_id = -1;        // Clone: id of the appended copy
  NodeKey clone_to;
  Vec3 clone_offset;
  std::string note;
};

struct MaintenancePlan {
  std::vector<Edit> edits;
  // Topology after all edits, already renumbered with old_to_new.
  OctreeIndex tree;
  // Indexed by pre-edit id, with clones appended; -1 marks pruned Gaussians.
  std::vector<int> old_to_new;
  std::size_t count_after = 0;
};

// Plans one maintenance pass. Prunes first (never the last Gaussian), then for
// each survivor in id order: migrate if the raw offset leaves its cell, else
// split if oversize, else clone if its gradient statistic exceeds the
// percentile threshold. Edits that would break one-Gaussian-per-leaf are
// reported as Rejected and leave the Gaussian in place.
MaintenancePlan plan_maintenance(const OctreeIndex& tree, const std::vector<GaussianState>& gaussians,
                                 const MaintenanceOptions& options, Rng& rng);

// Value at fraction q of the sorted sample, linear interpolation.
double percentile(std::vector<double> values, double q);

}  // namespace ockm::octree
