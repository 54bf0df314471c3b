// SPDX-License-Identifier: Apache-2.0
// Straight-line reference implementations shared by the unit and acceptance
// tests. None of them reuse the optimized code paths they are compared to.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "autodiff/tensor.hpp"
#include "autodiff/tape.hpp"
#include "common/rng.hpp"
#include "render/array.hpp"
#include "render/diff_render.hpp"
#include "render/gaussian.hpp"

namespace ockm::testref {

// Bit b of axis a sits at position 3*b + a.
inline std::uint64_t interleave(std::uint32_t ix, std::uint32_t iy, std::uint32_t iz, int depth) {
  std::uint64_t code = 0;
  for (int b = 0; b < depth; ++b) {
    code |= static_cast<std::uint64_t>((ix >> b) & 1u) << (3 * b);
    code |= static_cast<std::uint64_t>((iy >> b) & 1u) << (3 * b + 1);
    code |= static_cast<std::uint64_t>((iz >> b) & 1u) << (3 * b + 2);
  }
  return code;
}

// Textbook SSIM: explicit 2-D window sums at every valid position. Gaussian
// 11x11 window (sigma 1.5), uniform min(dim, 11) window on small images.
inline double ssim(const ad::Tensor& x, const ad::Tensor& y) {
  const bool gauss = x.rows >= 11 && x.cols >= 11;
  const std::size_t wr = std::min<std::size_t>(x.rows, 11), wc = std::min<std::size_t>(x.cols, 11);
  std::vector<double> w(wr * wc);
  double total = 0.0;
  for (std::size_t i = 0; i < wr; ++i)
    for (std::size_t j = 0; j < wc; ++j) {
      const double di = static_cast<double>(i) - 0.5 * static_cast<double>(wr - 1);
      const double dj = static_cast<double>(j) - 0.5 * static_cast<double>(wc - 1);
      w[i * wc + j] = gauss ? std::exp(-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)) : 1.0;
      total += w[i * wc + j];
    }
  for (auto& v : w) v /= total;
  const double c1 = 1e-4, c2 = 9e-4;
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t r0 = 0; r0 + wr <= x.rows; ++r0)
    for (std::size_t q0 = 0; q0 + wc <= x.cols; ++q0) {
      double mx = 0, my = 0, xx = 0, yy = 0, xy = 0;
      for (std::size_t i = 0; i < wr; ++i)
        for (std::size_t j = 0; j < wc; ++j) {
          const double k = w[i * wc + j], a = x(r0 + i, q0 + j), b = y(r0 + i, q0 + j);
          mx += k * a;
          my += k * b;
          xx += k * a * a;
          yy += k * b * b;
          xy += k * a * b;
        }
      const double vx = xx - mx * mx, vy = yy - my * my, cxy = xy - mx * my;
      acc += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return acc / static_cast<double>(count);
}

inline render::Primitive random_primitive(Rng& rng, double lo, double hi, double scale_lo, double scale_hi) {
  render::Primitive g;
  g.mu = {rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)};
  g.quat = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
  g.log_scale = {std::log(rng.uniform(scale_lo, scale_hi)), std::log(rng.uniform(scale_lo, scale_hi)),
                 std::log(rng.uniform(scale_lo, scale_hi))};
  g.alpha = rng.uniform(0.05, 0.95);
  g.gamma_sigmoid = rng.uniform(0.05, 0.95);
  return g;
}

struct SceneTensors {
  ad::Tensor mu, quat, log_scale, alpha, gsig;

  explicit SceneTensors(const std::vector<render::Primitive>& prims)
      : mu(prims.size(), 3), quat(prims.size(), 4), log_scale(prims.size(), 3), alpha(prims.size(), 1),
        gsig(prims.size(), 1) {
    for (std::size_t m = 0; m < prims.size(); ++m) {
      for (int i = 0; i < 3; ++i) {
        mu(m, static_cast<std::size_t>(i)) = prims[m].mu[i];
        log_scale(m, static_cast<std::size_t>(i)) = prims[m].log_scale[i];
      }
      for (std::size_t i = 0; i < 4; ++i) quat(m, i) = prims[m].quat[i];
      alpha[m] = prims[m].alpha;
      gsig[m] = prims[m].gamma_sigmoid;
    }
  }

  render::SceneVars on(ad::Tape& tape, bool grad = true) const {
    return {tape.leaf(mu, grad), tape.leaf(quat, grad), tape.leaf(log_scale, grad), tape.leaf(alpha, grad),
            tape.leaf(gsig, grad)};
  }
};

inline ad::CVar constant_column(ad::Tape& tape, const render::CVector& v) {
  ad::Tensor re(v.size(), 1), im(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) {
    re[i] = v[i].real();
    im[i] = v[i].imag();
  }
  return {tape.constant(re), tape.constant(im)};
}

// Order channel by the defining triple loop: primitives x directions x
// antennas, no binning shortcut.
inline render::CVector naive_order(const std::vector<render::Primitive>& prims, const std::vector<double>& d_hat,
                                   const std::vector<double>& eta, const render::CVector& sig, const render::Query& q,
                                   const std::vector<Vec3>& directions, int rows, int cols, bool first_order) {
  using cplx = std::complex<double>;
  constexpr double kPi = std::numbers::pi;
  const double lambda = render::wavelength(q.frequency);
  const render::ArrayGeometry geom = render::half_wave_array(rows, cols, lambda);
  render::CVector out(geom.size(), 0.0);
  const double k = 2.0 * kPi / lambda;
  const auto P = directions.size();
  for (std::size_t m = 0; m < prims.size(); ++m) {
    const double d_rx = norm(prims[m].mu - q.rx);
    cplx s = render::transmittance(prims[m].mu, q.rx, prims, static_cast<int>(m));
    if (first_order) s *= render::transmittance(q.tx, prims[m].mu, prims, static_cast<int>(m));
    s *= eta[m] * lambda / (std::pow(4.0 * kPi, 1.5) * d_hat[m] * d_rx);
    s *= std::polar(1.0, -k * (d_hat[m] + d_rx));
    s *= sig[m];
    const Vec3 u = normalized(prims[m].mu - q.rx);
    std::size_t best = 0;
    for (std::size_t p = 1; p < P; ++p)
      if (dot(u, directions[p]) > dot(u, directions[best])) best = p;
    for (std::size_t p = 0; p < P; ++p) {
      if (p != best) continue;
      for (std::size_t a = 0; a < geom.size(); ++a) out[a] += s * std::polar(1.0, k * dot(geom.elements[a], directions[p]));
    }
  }
  return out;
}

}  // namespace ockm::testref
