// SPDX-License-Identifier: Apache-2.0
#include "octree/maintenance.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "common/error.hpp"

namespace ockm::octree {

const char* edit_kind_name(EditKind k) {
  switch (k) {
    case EditKind::Prune: return "prune";
    case EditKind::Migrate: return "migrate";
    case EditKind::Split: return "split";
    case EditKind::Clone: return "clone";
    case EditKind::Rejected: return "rejected";
  }
  return "unknown";
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace {

bool offset_outside(const Vec3& offset, double edge) {
  const double h = 0.5 * edge;
  return std::abs(offset.x) > h || std::abs(offset.y) > h || std::abs(offset.z) > h;
}

double max_component(const Vec3& v) { return std::max({v.x, v.y, v.z}); }

// Free leaf for point p starting at `depth`, descending through internal nodes
// while staying at or above active_depth.
std::optional<NodeKey> host_for(const OctreeIndex& tree, const Vec3& p, int depth, int active_depth) {
  NodeKey k = key_containing(p, depth, tree.bounds());
  while (true) {
    if (tree.can_host(k)) return k;
    if (!tree.is_internal(k) || k.depth >= std::min(active_depth, tree.max_depth())) return std::nullopt;
    k = key_containing(p, k.depth + 1, tree.bounds());
  }
}

}  // namespace

MaintenancePlan plan_maintenance(const OctreeIndex& tree, const std::vector<GaussianState>& gaussians,
                                 const MaintenanceOptions& options, Rng& rng) {
  if (gaussians.size() != tree.gaussian_count()) {
    throw TopologyError("maintenance state covers " + std::to_string(gaussians.size()) + " gaussians, tree holds " +
                        std::to_string(tree.gaussian_count()));
  }
  MaintenancePlan plan;
  OctreeIndex work = tree;
  const int n = static_cast<int>(gaussians.size());
  std::vector<bool> pruned(gaussians.size(), false);

  int keep = 0;
  for (int i = 1; i < n; ++i)
    if (gaussians[static_cast<std::size_t>(i)].opacity > gaussians[static_cast<std::size_t>(keep)].opacity) keep = i;
  std::size_t alive = gaussians.size();
  for (int i = 0; i < n; ++i) {
    const GaussianState& g = gaussians[static_cast<std::size_t>(i)];
    if (!(g.opacity < options.prune_threshold) || i == keep) continue;
    const NodeKey key = *work.leaf_of(i);
    work.remove_leaf(key);
    pruned[static_cast<std::size_t>(i)] = true;
    --alive;
    Edit e;
    e.kind = EditKind::Prune;
    e.gaussian = i;
    e.from = key;
    plan.edits.push_back(e);
  }

  std::vector<double> norms;
  for (int i = 0; i < n; ++i)
    if (!pruned[static_cast<std::size_t>(i)]) norms.push_back(gaussians[static_cast<std::size_t>(i)].grad_norm);
  const double tau_grad = percentile(norms, options.grad_percentile);
  const double ln2 = std::numbers::ln2;
  int next_id = n;

  for (int i = 0; i < n; ++i) {
    if (pruned[static_cast<std::size_t>(i)]) continue;
    const GaussianState& g = gaussians[static_cast<std::size_t>(i)];
    const NodeKey key = *work.leaf_of(i);
    const CellGeometry cell = cell_geometry(key, work.bounds());
    const Vec3 mu = cell.center + clamp_offset(g.offset, cell.edge);

    if (offset_outside(g.offset, cell.edge)) {
      const Vec3 target_point = cell.center + g.offset;
      work.remove_leaf(key);
      auto target = host_for(work, target_point, key.depth, options.active_depth);
      Edit e;
      e.gaussian = i;
      e.from = key;
      if (target && *target != key) {
        const CellGeometry tc = cell_geometry(*target, work.bounds());
        work.insert_leaf(*target, i);
        e.kind = EditKind::Migrate;
        e.to = *target;
        e.offset = clamp_offset(target_point - tc.center, tc.edge);
      } else {
        work.insert_leaf(key, i);
        e.kind = EditKind::Rejected;
        e.to = key;
        e.offset = clamp_offset(g.offset, cell.edge);
        e.note = target ? "migration target outside the scene cube" : "migration target cell unavailable";
      }
      plan.edits.push_back(e);
      continue;
    }

    const bool can_refine = key.depth < std::min(options.active_depth, work.max_depth());
    if (std::exp(max_component(g.log_scale)) > cell.edge) {
      Edit e;
      e.gaussian = i;
      e.from = key;
      if (can_refine) {
        const NodeKey child = key_containing(mu, key.depth + 1, work.bounds());
        work.remove_leaf(key);
        work.insert_leaf(child, i);
        e.kind = EditKind::Split;
        e.to = child;
        e.offset = clamp_offset(mu - cell_geometry(child, work.bounds()).center, 0.5 * cell.edge);
        e.log_scale_shift = -ln2;
        plan.edits.push_back(e);
        continue;
      }
      // Oversize at the active depth is handled by the scale clamp.
    }

    if (g.grad_norm > tau_grad && norms.size() > 1) {
      Edit e;
      e.gaussian = i;
      e.from = key;
      if (!can_refine) {
        e.kind = EditKind::Rejected;
        e.to = key;
        e.offset = g.offset;
        e.note = "clone at active depth would share a leaf";
        plan.edits.push_back(e);
        continue;
      }
      if (alive >= options.max_gaussians) {
        e.kind = EditKind::Rejected;
        e.to = key;
        e.offset = g.offset;
        e.note = "gaussian budget exhausted";
        plan.edits.push_back(e);
        continue;
      }
      const double sigma = cell.edge / 4.0;
      const Vec3 jitter{rng.normal(0.0, sigma), rng.normal(0.0, sigma), rng.normal(0.0, sigma)};
      const int depth = key.depth + 1;
      const NodeKey a = key_containing(mu, depth, work.bounds());
      NodeKey b = key_containing(mu + jitter, depth, work.bounds());
      // Keep both inside the old cell.
      if (parent_of(b) != key) b = a;
      if (b == a) {
        int axis = 0;
        for (int ax = 1; ax < 3; ++ax)
          if (std::abs(jitter[ax]) > std::abs(jitter[axis])) axis = ax;
        b = {depth, a.code ^ (std::uint64_t{1} << axis)};
      }
      work.remove_leaf(key);
      work.insert_leaf(a, i);
      work.insert_leaf(b, next_id);
      const CellGeometry ca = cell_geometry(a, work.bounds());
      const CellGeometry cb = cell_geometry(b, work.bounds());
      e.kind = EditKind::Clone;
      e.to = a;
      e.offset = clamp_offset(mu - ca.center, ca.edge);
      e.log_scale_shift = -ln2;
      e.clone_id = next_id;
      e.clone_to = b;
      e.clone_offset = clamp_offset(mu + jitter - cb.center, cb.edge);
      plan.edits.push_back(e);
      ++next_id;
      ++alive;
    }
  }

  plan.old_to_new.assign(static_cast<std::size_t>(next_id), -1);
  int fresh = 0;
  for (int i = 0; i < next_id; ++i) {
    if (i < n && pruned[static_cast<std::size_t>(i)]) continue;
    plan.old_to_new[static_cast<std::size_t>(i)] = fresh++;
  }
  work.remap_gaussians(plan.old_to_new);
  plan.tree = std::move(work);
  plan.count_after = static_cast<std::size_t>(fresh);
  return plan;
}

}  // namespace ockm::octree
