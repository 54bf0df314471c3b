// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "common/vec3.hpp"
#include "octree/morton.hpp"

namespace ockm::octree {

// Axis-aligned cube the whole tree partitions.
struct Bounds {
  Vec3 min{0.0, 0.0, 0.0};
  double edge = 1.0;
};

struct CellGeometry {
  Vec3 center;
  double edge = 0.0;
};

CellGeometry cell_geometry(const NodeKey& key, const Bounds& bounds);

// Key of the depth-`depth` cell containing p; p is clamped into the bounds.
NodeKey key_containing(const Vec3& p, int depth, const Bounds& bounds);

enum class NodeKind { Inactive, Internal, OccupiedLeaf, EmptyLeaf };

// Sparse full octree. Only Gaussian-hosting leaves are stored; internal nodes
// are every proper prefix of an occupied leaf, and the remaining children of
// internal nodes are virtual empty leaves. Every internal node therefore has
// exactly eight active children.
class OctreeIndex {
 public:
  OctreeIndex() = default;
  OctreeIndex(Bounds bounds, int max_depth);

  const Bounds& bounds() const { return bounds_; }
  int max_depth() const { return max_depth_; }

  // Inserts an occupied leaf. Throws TopologyError when the key is already
  // occupied or internal, when an ancestor is an occupied leaf, when the
  // Gaussian already has a leaf, or when depth is outside [1, max_depth].
  void insert_leaf(const NodeKey& key, int gaussian_id);
  void remove_leaf(const NodeKey& key);
  // Whether insert_leaf(key, id) would succeed for an unanchored id.
  bool can_host(const NodeKey& key) const;

  NodeKind kind(const NodeKey& key) const;
  bool is_occupied(const NodeKey& key) const { return leaves_.count(key) != 0; }
  bool is_internal(const NodeKey& key) const { return internal_.count(key) != 0; }
  bool is_active(const NodeKey& key) const { return kind(key) != NodeKind::Inactive; }

  std::optional<int> gaussian_at(const NodeKey& key) const;
  std::optional<NodeKey> leaf_of(int gaussian_id) const;

  // Renumbers Gaussians; old ids mapped to -1 must already be removed.
  void remap_gaussians(const std::vector<int>& old_to_new);

  const std::map<NodeKey, int>& occupied() const { return leaves_; }
  std::size_t gaussian_count() const { return leaves_.size(); }

  // Internal nodes followed by their eight children, sorted by (depth, code).
  std::vector<NodeKey> active_nodes() const;
  std::vector<NodeKey> internal_nodes() const;

  // Occupied leaves at or below key.
  std::size_t occupied_in_subtree(const NodeKey& key) const;

  int deepest_leaf_depth() const;

  bool operator==(const OctreeIndex& o) const;

 private:
  Bounds bounds_;
  int max_depth_ = 1;
  std::map<NodeKey, int> leaves_;              // key -> gaussian id
  std::map<int, NodeKey> leaf_of_gaussian_;    // gaussian id -> key
  std::map<NodeKey, std::size_t> internal_;    // key -> occupied descendants
};

// mu = center + clamp(offset, +-edge/2). Throws TopologyError when the anchor is
// not an occupied leaf.
Vec3 gaussian_position(const NodeKey& anchor, const Vec3& offset, const OctreeIndex& tree);
Vec3 clamp_offset(const Vec3& offset, double edge);

// Deterministic raw structural descriptor of a node:
//   [one-hot depth (max_depth+1) | one-hot last octant (8) |
//    Morton digits / 7 zero-padded (max_depth) | subtree occupancy fraction |
//    normalized cell center (3)]
// The occupancy fraction is occupied leaves / 8^(active_depth - depth).
std::size_t descriptor_size(int max_depth);
std::vector<double> raw_descriptor(const NodeKey& key, const OctreeIndex& tree, int active_depth);

// Text snapshot, one line per materialized node:
//   depth code ix iy iz occupied gaussian_id
// preceded by '#' summary lines.
std::string export_snapshot(const OctreeIndex& tree);
OctreeIndex parse_snapshot(const std::string& text, const Bounds& bounds, int max_depth);

}  // namespace ockm::octree
