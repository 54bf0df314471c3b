// SPDX-License-Identifier: Apache-2.0
#include "render/diff_render.hpp"

#include <cmath>
#include <numbers>

#include "common/dual.hpp"
#include "common/error.hpp"
#include "common/parallel.hpp"
#include "render/gaussian.hpp"

namespace ockm::render {

using ad::CVar;
using ad::Tape;
using ad::Tensor;
using ad::Var;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Vec3 row3(const Tensor& t, std::size_t r) { return {t(r, 0), t(r, 1), t(r, 2)}; }
std::array<double, 4> row4(const Tensor& t, std::size_t r) { return {t(r, 0), t(r, 1), t(r, 2), t(r, 3)}; }

struct Hit {
  int k;
  double G;
};

struct SegmentState {
  std::vector<Hit> hits;
  double amplitude = 1.0;
  double phase = 0.0;
};

Vec3 endpoint_b(const Segment& s, const Tensor& mu) {
  return s.moving >= 0 ? row3(mu, static_cast<std::size_t>(s.moving)) : s.b;
}

}  // namespace

CVar segment_transmittance(const SceneVars& scene, const std::vector<Segment>& segments) {
  const Tensor& mu = scene.mu.value();
  const Tensor& quat = scene.quat.value();
  const Tensor& ls = scene.log_scale.value();
  const Tensor& alpha = scene.alpha.value();
  const Tensor& gsig = scene.gamma_sigmoid.value();
  const std::size_t M = mu.rows;
  if (mu.cols != 3 || quat.rows != M || quat.cols != 4 || ls.rows != M || ls.cols != 3 || alpha.rows != M ||
      gsig.rows != M) {
    throw DimensionError("scene tensors disagree on primitive count");
  }
  auto states = std::make_shared<std::vector<SegmentState>>(segments.size());
  auto segs = std::make_shared<const std::vector<Segment>>(segments);
  Tensor out(segments.size(), 2);

  parallel_for(segments.size(), [&](std::size_t s) {
    const Segment& seg = segments[s];
    const Vec3 b = endpoint_b(seg, mu);
    if (norm(b - seg.a) <= 0.0) throw DomainError("transmittance segment has coincident endpoints");
    SegmentState& st = (*states)[s];
    for (std::size_t k = 0; k < M; ++k) {
      if (static_cast<int>(k) == seg.exclude) continue;
      const double G = project_gaussian<double>(to_v3(seg.a), to_v3(b), to_v3(row3(mu, k)), row4(quat, k),
                                                to_v3(row3(ls, k)));
      if (G <= 0.0) continue;
      st.hits.push_back({static_cast<int>(k), G});
      st.amplitude *= 1.0 - alpha[k] * G;
      st.phase -= kTwoPi * gsig[k] * G;
    }
    out(s, 0) = st.amplitude * std::cos(st.phase);
    out(s, 1) = st.amplitude * std::sin(st.phase);
  });

  const SceneVars sv = scene;
  Var both = scene.mu.tape->record(
      std::move(out), {scene.mu, scene.quat, scene.log_scale, scene.alpha, scene.gamma_sigmoid},
      [sv, states, segs](Tape& t, int self) {
        const Tensor& g = t.grad(self);
        const Tensor& mu = t.value(sv.mu.id);
        const Tensor& quat = t.value(sv.quat.id);
        const Tensor& ls = t.value(sv.log_scale.id);
        const Tensor& alpha = t.value(sv.alpha.id);
        const Tensor& gsig = t.value(sv.gamma_sigmoid.id);
        Tensor* g_mu = t.requires_grad(sv.mu.id) ? &t.grad(sv.mu.id) : nullptr;
        Tensor* g_q = t.requires_grad(sv.quat.id) ? &t.grad(sv.quat.id) : nullptr;
        Tensor* g_ls = t.requires_grad(sv.log_scale.id) ? &t.grad(sv.log_scale.id) : nullptr;
        Tensor* g_a = t.requires_grad(sv.alpha.id) ? &t.grad(sv.alpha.id) : nullptr;
        Tensor* g_s = t.requires_grad(sv.gamma_sigmoid.id) ? &t.grad(sv.gamma_sigmoid.id) : nullptr;
        const bool need_geometry = g_mu || g_q || g_ls;

        std::vector<double> prefix, suffix;
        for (std::size_t s = 0; s < segs->size(); ++s) {
          const SegmentState& st = (*states)[s];
          const std::size_t H = st.hits.size();
          if (H == 0) continue;
          const double gre = g(s, 0), gim = g(s, 1);
          if (gre == 0.0 && gim == 0.0) continue;
          const double c = std::cos(st.phase), sn = std::sin(st.phase);
          const double dA = gre * c + gim * sn;
          const double dphi = st.amplitude * (-gre * sn + gim * c);

          prefix.assign(H + 1, 1.0);
          suffix.assign(H + 1, 1.0);
          for (std::size_t h = 0; h < H; ++h) {
            const auto k = static_cast<std::size_t>(st.hits[h].k);
            prefix[h + 1] = prefix[h] * (1.0 - alpha[k] * st.hits[h].G);
          }
          for (std::size_t h = H; h-- > 0;) {
            const auto k = static_cast<std::size_t>(st.hits[h].k);
            suffix[h] = suffix[h + 1] * (1.0 - alpha[k] * st.hits[h].G);
          }

          const Segment& seg = (*segs)[s];
          for (std::size_t h = 0; h < H; ++h) {
            const auto k = static_cast<std::size_t>(st.hits[h].k);
            const double G = st.hits[h].G;
            const double others = prefix[h] * suffix[h + 1];
            if (g_a) (*g_a)[k] += dA * (-G * others);
            if (g_s) (*g_s)[k] += dphi * (-kTwoPi * G);
            if (!need_geometry) continue;
            const double dG = dA * (-alpha[k] * others) + dphi * (-kTwoPi * gsig[k]);
            if (dG == 0.0) continue;

            using D = Dual<13>;
            const Vec3 bval = endpoint_b(seg, mu);
            V3<D> a{D(seg.a.x), D(seg.a.y), D(seg.a.z)};
            V3<D> b{D(bval.x), D(bval.y), D(bval.z)};
            if (seg.moving >= 0)
              for (int i = 0; i < 3; ++i) b[static_cast<std::size_t>(i)] = D::variable(bval[i], i);
            V3<D> m{D::variable(mu(k, 0), 3), D::variable(mu(k, 1), 4), D::variable(mu(k, 2), 5)};
            std::array<D, 4> q;
            for (int i = 0; i < 4; ++i) q[static_cast<std::size_t>(i)] = D::variable(quat(k, static_cast<std::size_t>(i)), 6 + i);
            V3<D> l;
            for (int i = 0; i < 3; ++i) l[static_cast<std::size_t>(i)] = D::variable(ls(k, static_cast<std::size_t>(i)), 10 + i);
            const D Gd = project_gaussian<D>(a, b, m, q, l);

            if (g_mu) {
              if (seg.moving >= 0) {
                const auto mv = static_cast<std::size_t>(seg.moving);
                for (std::size_t i = 0; i < 3; ++i) (*g_mu)(mv, i) += dG * Gd.d[i];
              }
              for (std::size_t i = 0; i < 3; ++i) (*g_mu)(k, i) += dG * Gd.d[3 + i];
            }
            if (g_q)
              for (std::size_t i = 0; i < 4; ++i) (*g_q)(k, i) += dG * Gd.d[6 + i];
            if (g_ls)
              for (std::size_t i = 0; i < 3; ++i) (*g_ls)(k, i) += dG * Gd.d[10 + i];
          }
        }
      });
  return {ad::slice_cols(both, 0, 1), ad::slice_cols(both, 1, 2)};
}

SteeringTables make_tables(int rows, int cols, int directions, int V, int Z) {
  SteeringTables t;
  t.rows = rows;
  t.cols = cols;
  t.V = V;
  t.Z = Z;
  t.directions = sfg_directions(directions);
  const ArrayGeometry geom = half_wave_array(rows, cols, 1.0);
  const std::size_t Na = geom.size();
  const std::size_t P = t.directions.size();
  auto dre = std::make_shared<Tensor>(Na, P);
  auto dim = std::make_shared<Tensor>(Na, P);
  for (std::size_t p = 0; p < P; ++p) {
    const CVector b = steering_vector(t.directions[p], geom, 1.0);
    for (std::size_t k = 0; k < Na; ++k) {
      (*dre)(k, p) = b[k].real();
      (*dim)(k, p) = b[k].imag();
    }
  }
  const auto grid = spectrum_grid(V, Z);
  auto sre = std::make_shared<Tensor>(grid.size(), Na);
  auto sim = std::make_shared<Tensor>(grid.size(), Na);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const CVector b = steering_vector(grid[i], geom, 1.0);
    for (std::size_t k = 0; k < Na; ++k) {
      (*sre)(i, k) = b[k].real();
      (*sim)(i, k) = -b[k].imag();
    }
  }
  t.dir_re = dre;
  t.dir_im = dim;
  t.spec_re = sre;
  t.spec_im = sim;
  return t;
}

CVar render_los(const SceneVars& scene, const Query& q, const SteeringTables& tables) {
  const double d = norm(q.rx - q.tx);
  if (!(d > 0.0)) throw DomainError("transmitter and receiver coincide");
  const double lambda = wavelength(q.frequency);
  Tape& tape = *scene.mu.tape;
  const CVar theta = segment_transmittance(scene, {{q.tx, q.rx, -1, -1}});
  const double amp = lambda / (4.0 * std::numbers::pi * d);
  const std::complex<double> coef = std::polar(amp, -kTwoPi / lambda * d);
  const CVector b = steering_vector(normalized(q.tx - q.rx), tables.geometry(lambda), lambda);
  Tensor bre(b.size(), 1), bim(b.size(), 1);
  for (std::size_t k = 0; k < b.size(); ++k) {
    const std::complex<double> v = coef * b[k];
    bre[k] = v.real();
    bim[k] = v.imag();
  }
  return ad::cmul(theta, {tape.constant(std::move(bre)), tape.constant(std::move(bim))});
}

ad::CVar tx_transmittance(const SceneVars& scene, const Vec3& tx) {
  std::vector<Segment> segs(scene.count());
  for (std::size_t m = 0; m < segs.size(); ++m) segs[m] = {tx, {}, static_cast<int>(m), static_cast<int>(m)};
  return segment_transmittance(scene, segs);
}

ad::CVar rx_transmittance(const SceneVars& scene, const Vec3& rx) {
  // Closest approach is symmetric in the endpoints, so Rx is the fixed end.
  return tx_transmittance(scene, rx);
}

std::vector<int> direction_bins(const SceneVars& scene, const Vec3& rx, const std::vector<Vec3>& directions) {
  const Tensor& mu = scene.mu.value();
  std::vector<int> bins(mu.rows, 0);
  for (std::size_t m = 0; m < mu.rows; ++m) {
    const Vec3 v = row3(mu, m) - rx;
    const double n = norm(v);
    if (!(n > 0.0)) throw DomainError("primitive coincides with the receiver");
    bins[m] = nearest_direction(v / n, directions);
  }
  return bins;
}

CVar order_coefficients(const SceneVars& scene, const OrderInputs& in, const Query& q) {
  Tape& tape = *scene.mu.tape;
  const double lambda = wavelength(q.frequency);
  const Var rx = tape.constant(Tensor::from(1, 3, {q.rx.x, q.rx.y, q.rx.z}));
  const Var d_rx = ad::norm_rows(scene.mu - rx);
  for (double v : d_rx.value().data)
    if (!(v > 0.0)) throw DomainError("primitive coincides with the receiver");
  for (double v : in.d_hat.value().data)
    if (!(v > 0.0)) throw DomainError("effective path length must be positive");
  const double c0 = lambda / std::pow(4.0 * std::numbers::pi, 1.5);
  const Var amp = in.eta * c0 / (in.d_hat * d_rx);
  const Var phase = (in.d_hat + d_rx) * (-kTwoPi / lambda);
  CVar s = ad::cmul(ad::cscale(ad::cexp_i(phase), amp), in.signal);
  s = ad::cmul(s, in.theta_rx);
  if (in.has_tx_factor) s = ad::cmul(s, in.theta_tx);
  return s;
}

CVar render_order(const SceneVars& scene, const OrderInputs& in, const Query& q, const SteeringTables& tables) {
  const CVar s = order_coefficients(scene, in, q);
  const std::vector<int> bins = direction_bins(scene, q.rx, tables.directions);
  const std::size_t Na = tables.antennas();
  const std::size_t M = bins.size();
  Tensor bre(Na, M), bim(Na, M);
  for (std::size_t m = 0; m < M; ++m) {
    const auto p = static_cast<std::size_t>(bins[m]);
    for (std::size_t k = 0; k < Na; ++k) {
      bre(k, m) = (*tables.dir_re)(k, p);
      bim(k, m) = (*tables.dir_im)(k, p);
    }
  }
  return ad::cmatvec(bre, bim, s);
}

Var spectrum_var(const CVar& h, const SteeringTables& tables) {
  return ad::cabs2(ad::cmatvec(*tables.spec_re, *tables.spec_im, h));
}

Var gain_db_var(const CVar& h) {
  return ad::log(ad::sum(ad::cabs2(h)) + 1e-30) * (10.0 / std::numbers::ln10);
}

CVector to_cvector(const CVar& h) {
  const Tensor& re = h.re.value();
  const Tensor& im = h.im.value();
  CVector out(re.size());
  for (std::size_t i = 0; i < re.size(); ++i) out[i] = {re[i], im[i]};
  return out;
}

}  // namespace ockm::render
