// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "common/dual.hpp"
#include "common/vec3.hpp"

namespace ockm::render {

inline constexpr double kSigmaEps = 1e-9;
// Mahalanobis distances beyond this give G < 1e-13 and are treated as misses.
inline constexpr double kMissDistance2 = 60.0;

template <class T>
using V3 = std::array<T, 3>;

template <class T>
T dot3(const V3<T>& a, const V3<T>& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

// Rotation matrix of the normalized quaternion (w, x, y, z), row-major.
template <class T>
std::array<T, 9> quat_to_rotation(const std::array<T, 4>& q_raw) {
  using std::sqrt;
  const T n = sqrt(q_raw[0] * q_raw[0] + q_raw[1] * q_raw[1] + q_raw[2] * q_raw[2] + q_raw[3] * q_raw[3]);
  const T w = q_raw[0] / n, x = q_raw[1] / n, y = q_raw[2] / n, z = q_raw[3] / n;
  return {1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z),       2.0 * (x * z + w * y),
          2.0 * (x * y + w * z),       1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
          2.0 * (x * z - w * y),       2.0 * (y * z + w * x),       1.0 - 2.0 * (x * x + y * y)};
}

// Sigma = R diag(exp(2 log_scale)) R^T, row-major symmetric.
template <class T>
std::array<T, 9> covariance(const std::array<T, 4>& quat, const V3<T>& log_scale) {
  using std::exp;
  const auto R = quat_to_rotation(quat);
  const V3<T> s2{exp(2.0 * log_scale[0]), exp(2.0 * log_scale[1]), exp(2.0 * log_scale[2])};
  std::array<T, 9> S;
  for (int i = 0; i < 3; ++i) {
    for (int j = i; j < 3; ++j) {
      T acc = R[i * 3] * R[j * 3] * s2[0] + R[i * 3 + 1] * R[j * 3 + 1] * s2[1] + R[i * 3 + 2] * R[j * 3 + 2] * s2[2];
      S[i * 3 + j] = acc;
      S[j * 3 + i] = acc;
    }
  }
  return S;
}

// Unnormalized projected 2-D Gaussian of the primitive seen along segment a->b.
// Zero when the closest-approach parameter is not strictly inside (0, |b-a|).
template <class T>
T project_gaussian(const V3<T>& a, const V3<T>& b, const V3<T>& mu, const std::array<T, 4>& quat,
                   const V3<T>& log_scale) {
  using std::exp;
  using std::sqrt;
  const V3<T> seg{b[0] - a[0], b[1] - a[1], b[2] - a[2]};
  const T L = sqrt(dot3(seg, seg));
  const V3<T> r{seg[0] / L, seg[1] / L, seg[2] / L};
  const V3<T> rel{mu[0] - a[0], mu[1] - a[1], mu[2] - a[2]};
  const T t = dot3(rel, r);
  if (!(value_of(t) > 0.0) || !(value_of(t) < value_of(L))) return T(0.0);

  // Orthonormal basis of the plane orthogonal to r (Duff et al. 2017).
  const double sign = value_of(r[2]) >= 0.0 ? 1.0 : -1.0;
  const T ka = -1.0 / (sign + r[2]);
  const T kb = r[0] * r[1] * ka;
  const V3<T> e1{1.0 + sign * r[0] * r[0] * ka, sign * kb, -sign * r[0]};
  const V3<T> e2{kb, sign + r[1] * r[1] * ka, -r[1]};

  const auto S = covariance(quat, log_scale);
  auto apply = [&](const V3<T>& v) {
    return V3<T>{S[0] * v[0] + S[1] * v[1] + S[2] * v[2], S[3] * v[0] + S[4] * v[1] + S[5] * v[2],
                 S[6] * v[0] + S[7] * v[1] + S[8] * v[2]};
  };
  const V3<T> S1 = apply(e1);
  const V3<T> S2 = apply(e2);
  const T c11 = dot3(e1, S1) + kSigmaEps;
  const T c12 = dot3(e1, S2);
  const T c22 = dot3(e2, S2) + kSigmaEps;
  const T u1 = dot3(e1, rel);
  const T u2 = dot3(e2, rel);
  const T det = c11 * c22 - c12 * c12;
  const T q = (c22 * u1 * u1 - 2.0 * c12 * u1 * u2 + c11 * u2 * u2) / det;
  if (value_of(q) > kMissDistance2) return T(0.0);
  return exp(-0.5 * q);
}

// Plain-valued primitive used by reference paths.
struct Primitive {
  Vec3 mu;
  std::array<double, 4> quat{1.0, 0.0, 0.0, 0.0};
  Vec3 log_scale;
  double alpha = 0.5;
  double gamma_sigmoid = 0.5;  // sigmoid(gamma_raw)
};

inline V3<double> to_v3(const Vec3& v) { return {v.x, v.y, v.z}; }

inline double project_gaussian(const Vec3& a, const Vec3& b, const Primitive& g) {
  return project_gaussian<double>(to_v3(a), to_v3(b), to_v3(g.mu), g.quat, to_v3(g.log_scale));
}

// Theta = prod(1 - alpha_k G_k) * exp(-j 2pi/lambda sum gamma_k G_k), with
// gamma_k = sigmoid(gamma_raw_k) lambda, so the phase is -2pi sum sigmoid_k G_k.
// Primitive `exclude` is skipped.
std::complex<double> transmittance(const Vec3& a, const Vec3& b, const std::vector<Primitive>& prims,
                                   int exclude = -1);

}  // namespace ockm::render
