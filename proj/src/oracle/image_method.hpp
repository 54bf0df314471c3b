// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "common/vec3.hpp"
#include "render/array.hpp"

namespace ockm::oracle {

// Box room [0, Lx] x [0, Ly] x [0, Lz]. Walls are numbered
// 0: x=0, 1: x=Lx, 2: y=0, 3: y=Ly, 4: z=0 (floor), 5: z=Lz.
struct RoomSpec {
  Vec3 extent{4.0, 4.0, 3.0};
  std::array<double, 6> reflection{0.6, 0.6, 0.6, 0.6, 0.6, 0.6};
  int max_order = 3;

  bool contains(const Vec3& p) const;
  // Smallest distance from p to any wall.
  double wall_clearance(const Vec3& p) const;
  void validate() const;
};

struct ImageSource {
  Vec3 point;
  double gain = 1.0;       // product of reflection coefficients
  std::vector<int> walls;  // reflection sequence, first bounce first
};

Vec3 reflect(const Vec3& p, int wall, const Vec3& extent);

// Distinct image sources of exactly `order` reflections. Sequences never hit
// the same wall twice in a row, nor twice without the opposite wall in between;
// sequences landing on the same image are merged (first in lexicographic wall
// order kept).
std::vector<ImageSource> mirror_images(const Vec3& source, const RoomSpec& room, int order);

struct TracedChannel {
  render::CVector total;
  std::vector<render::CVector> orders;  // index 0 is LoS
};

// Exact specular channel up to room.max_order at the half-wavelength array.
TracedChannel trace_channel(const Vec3& tx, const Vec3& rx, double frequency, const RoomSpec& room, int array_rows,
                            int array_cols);

}  // namespace ockm::oracle
