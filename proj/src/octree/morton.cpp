// SPDX-License-Identifier: Apache-2.0
#include "octree/morton.hpp"

#include <string>

#include "common/error.hpp"

namespace ockm::octree {

namespace {

void check_depth(int depth) {
  if (depth < 0 || depth > kMaxSupportedDepth) {
    throw RangeError("octree depth " + std::to_string(depth) + " outside [0, " +
                     std::to_string(kMaxSupportedDepth) + "]");
  }
}

}  // namespace

std::uint64_t morton_encode(std::uint32_t ix, std::uint32_t iy, std::uint32_t iz, int depth) {
  check_depth(depth);
  const std::uint64_t side = std::uint64_t{1} << depth;
  if (ix >= side || iy >= side || iz >= side) {
    throw RangeError("cell coordinate out of range for depth " + std::to_string(depth));
  }
  std::uint64_t code = 0;
  for (int level = depth - 1; level >= 0; --level) {
    const std::uint64_t oct = ((ix >> level) & 1u) | (((iy >> level) & 1u) << 1) | (((iz >> level) & 1u) << 2);
    code = (code << 3) | oct;
  }
  return code;
}

CellCoord morton_decode(std::uint64_t code, int depth) {
  check_key({depth, code});
  CellCoord c{0, 0, 0};
  for (int level = depth - 1; level >= 0; --level) {
    const std::uint64_t oct = (code >> (3 * level)) & 7u;
    c[0] = (c[0] << 1) | static_cast<std::uint32_t>(oct & 1u);
    c[1] = (c[1] << 1) | static_cast<std::uint32_t>((oct >> 1) & 1u);
    c[2] = (c[2] << 1) | static_cast<std::uint32_t>((oct >> 2) & 1u);
  }
  return c;
}

void check_key(const NodeKey& k) {
  check_depth(k.depth);
  if (k.depth < 21 && (k.code >> (3 * k.depth)) != 0) {
    throw RangeError("morton code " + std::to_string(k.code) + " out of range for depth " + std::to_string(k.depth));
  }
}

std::vector<NodeKey> ancestors(const NodeKey& k) {
  check_key(k);
  std::vector<NodeKey> out;
  out.reserve(static_cast<std::size_t>(k.depth));
  NodeKey cur = k;
  while (cur.depth > 0) {
    cur = parent_of(cur);
    out.push_back(cur);
  }
  return out;
}

}  // namespace ockm::octree
