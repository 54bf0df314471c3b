// SPDX-License-Identifier: Apache-2.0
#include "oracle/image_method.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "common/error.hpp"

namespace ockm::oracle {

bool RoomSpec::contains(const Vec3& p) const {
  for (int a = 0; a < 3; ++a)
    if (!(p[a] > 0.0 && p[a] < extent[a])) return false;
  return true;
}

double RoomSpec::wall_clearance(const Vec3& p) const {
  double d = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) d = std::min({d, p[a], extent[a] - p[a]});
  return d;
}

void RoomSpec::validate() const {
  for (int a = 0; a < 3; ++a)
    if (!(extent[a] > 0.0)) throw ConfigError("room extents must be positive");
  for (double g : reflection)
    if (!(g >= 0.0 && g <= 1.0)) throw ConfigError("reflection coefficients must lie in [0, 1]");
  if (max_order < 0) throw ConfigError("room max_order must be >= 0");
}

Vec3 reflect(const Vec3& p, int wall, const Vec3& extent) {
  Vec3 q = p;
  const int axis = wall / 2;
  q[axis] = (wall % 2 == 0) ? -p[axis] : 2.0 * extent[axis] - p[axis];
  return q;
}

namespace {

// Per axis the image coordinate is s*x + 2*L*m; (s, m) identifies it exactly.
using Signature = std::array<int, 6>;

Signature step(Signature sig, int wall) {
  const int axis = wall / 2;
  int& s = sig[static_cast<std::size_t>(2 * axis)];
  int& m = sig[static_cast<std::size_t>(2 * axis + 1)];
  s = -s;
  m = (wall % 2 == 0) ? -m : 1 - m;
  return sig;
}

void enumerate(const RoomSpec& room, int order, std::vector<int>& seq, Signature sig, Vec3 point, double gain,
               std::set<Signature>& seen, std::vector<ImageSource>& out) {
  if (static_cast<int>(seq.size()) == order) {
    if (seen.insert(sig).second) out.push_back({point, gain, seq});
    return;
  }
  for (int w = 0; w < 6; ++w) {
    // Along one axis a specular path must alternate between the two walls.
    const auto last_same_axis = std::find_if(seq.rbegin(), seq.rend(), [w](int v) { return v / 2 == w / 2; });
    if (last_same_axis != seq.rend() && *last_same_axis == w) continue;
    seq.push_back(w);
    enumerate(room, order, seq, step(sig, w), reflect(point, w, room.extent),
              gain * room.reflection[static_cast<std::size_t>(w)], seen, out);
    seq.pop_back();
  }
}

}  // namespace

std::vector<ImageSource> mirror_images(const Vec3& source, const RoomSpec& room, int order) {
  if (order < 0) throw RangeError("image order must be >= 0");
  if (!room.contains(source)) throw DomainError("source must lie strictly inside the room");
  std::vector<ImageSource> out;
  std::set<Signature> seen;
  std::vector<int> seq;
  enumerate(room, order, seq, Signature{1, 0, 1, 0, 1, 0}, source, 1.0, seen, out);
  return out;
}

TracedChannel trace_channel(const Vec3& tx, const Vec3& rx, double frequency, const RoomSpec& room, int array_rows,
                            int array_cols) {
  if (!room.contains(tx) || !room.contains(rx)) throw DomainError("trace endpoints must lie inside the room");
  const double lambda = render::wavelength(frequency);
  const double k = 2.0 * std::numbers::pi / lambda;
  const render::ArrayGeometry geom = render::half_wave_array(array_rows, array_cols, lambda);
  TracedChannel out;
  out.total.assign(geom.size(), 0.0);
  for (int n = 0; n <= room.max_order; ++n) {
    render::CVector h(geom.size(), 0.0);
    for (const ImageSource& img : mirror_images(tx, room, n)) {
      const Vec3 v = img.point - rx;
      const double d = norm(v);
      if (!(d > 0.0)) throw DomainError("image source coincides with the receiver");
      const render::cplx coef = std::polar(img.gain * lambda / (4.0 * std::numbers::pi * d), -k * d);
      const render::CVector b = render::steering_vector(v / d, geom, lambda);
      for (std::size_t a = 0; a < h.size(); ++a) h[a] += coef * b[a];
    }
    for (std::size_t a = 0; a < h.size(); ++a) out.total[a] += h[a];
    out.orders.push_back(std::move(h));
  }
  return out;
}

}  // namespace ockm::oracle
