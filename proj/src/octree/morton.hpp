// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <vector>

namespace ockm::octree {

// 3 bits per level in a 64-bit code.
inline constexpr int kMaxSupportedDepth = 20;

using CellCoord = std::array<std::uint32_t, 3>;

// Interleaves one bit per axis per level, most-significant level first. Within
// a level the octant is x | (y << 1) | (z << 2).
std::uint64_t morton_encode(std::uint32_t ix, std::uint32_t iy, std::uint32_t iz, int depth);
CellCoord morton_decode(std::uint64_t code, int depth);

struct NodeKey {
  int depth = 0;
  std::uint64_t code = 0;

  auto operator<=>(const NodeKey&) const = default;
};

inline int octant_of(const NodeKey& k) { return static_cast<int>(k.code & 7u); }
inline NodeKey parent_of(const NodeKey& k) { return {k.depth - 1, k.code >> 3}; }
inline NodeKey child_of(const NodeKey& k, int octant) {
  return {k.depth + 1, (k.code << 3) | static_cast<std::uint64_t>(octant)};
}

// Validates 0 <= code < 8^depth and 0 <= depth <= kMaxSupportedDepth.
void check_key(const NodeKey& k);

// Root-ward prefixes: element i is the prefix at depth (depth - 1 - i); the
// last element is the root. Empty for the root itself.
std::vector<NodeKey> ancestors(const NodeKey& k);

// Octant digit at a level in [1, depth].
inline int digit_at(const NodeKey& k, int level) {
  return static_cast<int>((k.code >> (3 * (k.depth - level))) & 7u);
}

}  // namespace ockm::octree
