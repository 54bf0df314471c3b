// SPDX-License-Identifier: Apache-2.0
#include "octree/octree.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "common/error.hpp"

namespace ockm::octree {

CellGeometry cell_geometry(const NodeKey& key, const Bounds& bounds) {
  const CellCoord c = morton_decode(key.code, key.depth);
  const double edge = bounds.edge / static_cast<double>(std::uint64_t{1} << key.depth);
  return {{bounds.min.x + (c[0] + 0.5) * edge, bounds.min.y + (c[1] + 0.5) * edge, bounds.min.z + (c[2] + 0.5) * edge},
          edge};
}

NodeKey key_containing(const Vec3& p, int depth, const Bounds& bounds) {
  const std::uint64_t side = std::uint64_t{1} << depth;
  CellCoord c{};
  for (int a = 0; a < 3; ++a) {
    const double u = (p[a] - bounds.min[a]) / bounds.edge * static_cast<double>(side);
    const double fl = std::floor(u);
    c[static_cast<std::size_t>(a)] =
        static_cast<std::uint32_t>(std::clamp(fl, 0.0, static_cast<double>(side - 1)));
  }
  return {depth, morton_encode(c[0], c[1], c[2], depth)};
}

OctreeIndex::OctreeIndex(Bounds bounds, int max_depth) : bounds_(bounds), max_depth_(max_depth) {
  if (max_depth < 1 || max_depth > kMaxSupportedDepth) throw RangeError("octree max depth out of range");
  if (!(bounds.edge > 0.0)) throw RangeError("octree bounds must have positive edge length");
}

bool OctreeIndex::can_host(const NodeKey& key) const {
  if (key.depth < 1 || key.depth > max_depth_) return false;
  if (is_occupied(key) || is_internal(key)) return false;
  for (const NodeKey& a : ancestors(key))
    if (is_occupied(a)) return false;
  return true;
}

void OctreeIndex::insert_leaf(const NodeKey& key, int gaussian_id) {
  check_key(key);
  if (leaf_of_gaussian_.count(gaussian_id) != 0) {
    throw TopologyError("gaussian " + std::to_string(gaussian_id) + " already anchored");
  }
  if (!can_host(key)) {
    throw TopologyError("cell (" + std::to_string(key.depth) + ", " + std::to_string(key.code) +
                        ") cannot host another gaussian");
  }
  leaves_.emplace(key, gaussian_id);
  leaf_of_gaussian_.emplace(gaussian_id, key);
  for (const NodeKey& a : ancestors(key)) ++internal_[a];
}

void OctreeIndex::remove_leaf(const NodeKey& key) {
  auto it = leaves_.find(key);
  if (it == leaves_.end()) throw TopologyError("removing a leaf that is not occupied");
  leaf_of_gaussian_.erase(it->second);
  leaves_.erase(it);
  for (const NodeKey& a : ancestors(key)) {
    auto jt = internal_.find(a);
    if (--jt->second == 0) internal_.erase(jt);
  }
}

NodeKind OctreeIndex::kind(const NodeKey& key) const {
  if (is_occupied(key)) return NodeKind::OccupiedLeaf;
  if (is_internal(key)) return NodeKind::Internal;
  if (key.depth > 0 && is_internal(parent_of(key))) return NodeKind::EmptyLeaf;
  return NodeKind::Inactive;
}

std::optional<int> OctreeIndex::gaussian_at(const NodeKey& key) const {
  auto it = leaves_.find(key);
  if (it == leaves_.end()) return std::nullopt;
  return it->second;
}

std::optional<NodeKey> OctreeIndex::leaf_of(int gaussian_id) const {
  auto it = leaf_of_gaussian_.find(gaussian_id);
  if (it == leaf_of_gaussian_.end()) return std::nullopt;
  return it->second;
}

void OctreeIndex::remap_gaussians(const std::vector<int>& old_to_new) {
  std::map<int, NodeKey> remapped;
  for (auto& [key, gid] : leaves_) {
    if (gid < 0 || static_cast<std::size_t>(gid) >= old_to_new.size() || old_to_new[static_cast<std::size_t>(gid)] < 0) {
      throw TopologyError("remap drops gaussian " + std::to_string(gid) + " that still owns a leaf");
    }
    gid = old_to_new[static_cast<std::size_t>(gid)];
    remapped.emplace(gid, key);
  }
  leaf_of_gaussian_ = std::move(remapped);
}

std::vector<NodeKey> OctreeIndex::internal_nodes() const {
  std::vector<NodeKey> out;
  out.reserve(internal_.size());
  for (const auto& [k, _] : internal_) out.push_back(k);
  return out;
}

std::vector<NodeKey> OctreeIndex::active_nodes() const {
  std::vector<NodeKey> out;
  out.reserve(internal_.size() * 9);
  for (const auto& [k, _] : internal_) {
    if (k.depth == 0) out.push_back(k);
    for (int o = 0; o < 8; ++o) out.push_back(child_of(k, o));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t OctreeIndex::occupied_in_subtree(const NodeKey& key) const {
  if (is_occupied(key)) return 1;
  auto it = internal_.find(key);
  return it == internal_.end() ? 0 : it->second;
}

int OctreeIndex::deepest_leaf_depth() const {
  int d = 0;
  for (const auto& [k, _] : leaves_) d = std::max(d, k.depth);
  return d;
}

bool OctreeIndex::operator==(const OctreeIndex& o) const {
  return bounds_.min == o.bounds_.min && bounds_.edge == o.bounds_.edge && max_depth_ == o.max_depth_ &&
         leaves_ == o.leaves_;
}

Vec3 clamp_offset(const Vec3& offset, double edge) {
  const double h = 0.5 * edge;
  return {std::clamp(offset.x, -h, h), std::clamp(offset.y, -h, h), std::clamp(offset.z, -h, h)};
}

Vec3 gaussian_position(const NodeKey& anchor, const Vec3& offset, const OctreeIndex& tree) {
  if (!tree.is_occupied(anchor)) throw TopologyError("gaussian anchor is not an occupied leaf");
  const CellGeometry g = cell_geometry(anchor, tree.bounds());
  return g.center + clamp_offset(offset, g.edge);
}

std::size_t descriptor_size(int max_depth) {
  return static_cast<std::size_t>(max_depth + 1) + 8 + static_cast<std::size_t>(max_depth) + 1 + 3;
}

std::vector<double> raw_descriptor(const NodeKey& key, const OctreeIndex& tree, int active_depth) {
  const int md = tree.max_depth();
  if (key.depth > md) throw RangeError("descriptor requested beyond max depth");
  std::vector<double> d(descriptor_size(md), 0.0);
  std::size_t off = 0;
  d[off + static_cast<std::size_t>(key.depth)] = 1.0;
  off += static_cast<std::size_t>(md + 1);
  if (key.depth > 0) d[off + static_cast<std::size_t>(octant_of(key))] = 1.0;
  off += 8;
  for (int level = 1; level <= key.depth; ++level) {
    d[off + static_cast<std::size_t>(level - 1)] = digit_at(key, level) / 7.0;
  }
  off += static_cast<std::size_t>(md);
  const int span = std::max(0, active_depth - key.depth);
  d[off] = static_cast<double>(tree.occupied_in_subtree(key)) / std::pow(8.0, span);
  off += 1;
  const CellGeometry g = cell_geometry(key, tree.bounds());
  const Bounds& b = tree.bounds();
  for (int a = 0; a < 3; ++a) d[off + static_cast<std::size_t>(a)] = (g.center[a] - b.min[a]) / b.edge;
  return d;
}

std::string export_snapshot(const OctreeIndex& tree) {
  std::ostringstream os;
  std::map<int, std::size_t> per_depth;
  for (const auto& [k, _] : tree.occupied()) ++per_depth[k.depth];
  os << "# gaussians " << tree.gaussian_count() << "\n";
  for (const auto& [d, n] : per_depth) os << "# leaves_at_depth " << d << " " << n << "\n";
  std::vector<NodeKey> nodes = tree.internal_nodes();
  for (const auto& [k, _] : tree.occupied()) nodes.push_back(k);
  std::sort(nodes.begin(), nodes.end());
  for (const NodeKey& k : nodes) {
    const CellCoord c = morton_decode(k.code, k.depth);
    const auto gid = tree.gaussian_at(k);
    os << k.depth << ' ' << k.code << ' ' << c[0] << ' ' << c[1] << ' ' << c[2] << ' ' << (gid ? 1 : 0) << ' '
       << (gid ? *gid : -1) << '\n';
  }
  return os.str();
}

OctreeIndex parse_snapshot(const std::string& text, const Bounds& bounds, int max_depth) {
  OctreeIndex tree(bounds, max_depth);
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    NodeKey k;
    std::uint32_t ix = 0, iy = 0, iz = 0;
    int occupied = 0, gid = -1;
    if (!(ls >> k.depth >> k.code >> ix >> iy >> iz >> occupied >> gid)) {
      throw FormatError("malformed octree snapshot line: " + line);
    }
    if (morton_encode(ix, iy, iz, k.depth) != k.code) throw FormatError("snapshot coordinates disagree with code");
    if (occupied) tree.insert_leaf(k, gid);
  }
  return tree;
}

}  // namespace ockm::octree
