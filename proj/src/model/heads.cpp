// SPDX-License-Identifier: Apache-2.0
#include "model/heads.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "common/error.hpp"

namespace ockm::model {

namespace {

Var linear(const Bound& b, Var x, int w, int bias) { return ad::add(ad::matmul(x, b[w]), b[bias]); }

Tensor broadcast_row(std::size_t rows, std::span<const double> row) {
  Tensor t(rows, row.size());
  for (std::size_t i = 0; i < rows; ++i) std::copy(row.begin(), row.end(), t.row_span(i).begin());
  return t;
}

Var unit_rows(Var v, const char* what) {
  const Var n = ad::norm_rows(v);
  for (double x : n.value().data)
    if (!(x > 0.0)) throw DomainError(std::string("degenerate direction: ") + what);
  return ad::div(v, n);
}

}  // namespace

std::array<double, kFreqEmbedDim> frequency_embedding(double frequency_hz) {
  if (!(frequency_hz > 0.0) || !std::isfinite(frequency_hz)) throw DomainError("frequency must be positive");
  const double ghz = frequency_hz * 1e-9;
  std::array<double, kFreqEmbedDim> e{};
  e[0] = ghz;
  for (std::size_t k = 0; k < kBandScalesGhz.size(); ++k) {
    const double a = std::numbers::pi * ghz / kBandScalesGhz[k];
    e[1 + 2 * k] = std::sin(a);
    e[2 + 2 * k] = std::cos(a);
  }
  return e;
}

OrderGeometry bypass_geometry(Var mu, const Vec3& tx) {
  ad::Tape& tape = *mu.tape;
  const double t[3] = {tx.x, tx.y, tx.z};
  const Var v = ad::sub(mu, tape.constant(Tensor::row(t)));
  const Var d = ad::norm_rows(v);
  for (double x : d.value().data)
    if (!(x > 0.0)) throw DomainError("Gaussian coincides with the transmitter");
  OrderGeometry g;
  g.omega = ad::div(v, d);
  g.d_hat = d;
  g.eta = tape.constant(Tensor(mu.rows(), 1, 1.0));
  return g;
}

GeometryParams add_geometry_params(ParamStore& store, int feature_dim, int hidden, Rng& rng) {
  GeometryParams p;
  p.input_dim = feature_dim + 5;
  p.hidden = hidden;
  const auto in = static_cast<std::size_t>(p.input_dim);
  const auto h = static_cast<std::size_t>(hidden);
  auto gate = [&](const std::string& n, int& w, int& u, int& b) {
    w = store.add("geo.w" + n, xavier(rng, in, h));
    u = store.add("geo.u" + n, xavier(rng, h, h));
    b = store.add("geo.b" + n, Tensor(1, h));
  };
  gate("z", p.wz, p.uz, p.bz);
  gate("r", p.wr, p.ur, p.br);
  gate("h", p.wh, p.uh, p.bh);
  p.w_omega = store.add("geo.w_omega", xavier(rng, h, 3, 0.1));
  p.b_omega = store.add("geo.b_omega", Tensor(1, 3));
  p.w_d = store.add("geo.w_d", xavier(rng, h, 1, 0.1));
  p.b_d = store.add("geo.b_d", Tensor::scalar(-2.0));
  p.w_eta = store.add("geo.w_eta", xavier(rng, h, 1, 0.1));
  p.b_eta = store.add("geo.b_eta", Tensor::scalar(0.0));
  return p;
}

OrderGeometry geometry_step(const Bound& b, const GeometryParams& p, Var x, const OrderGeometry& prev, Var& hidden,
                            double d_scale) {
  const Var in = ad::concat_cols({x, prev.omega, prev.d_hat * (1.0 / d_scale), prev.eta});
  if (static_cast<int>(in.cols()) != p.input_dim) throw ConfigError("geometry head input width mismatch");
  const Var z = ad::sigmoid(ad::add(linear(b, in, p.wz, p.bz), ad::matmul(hidden, b[p.uz])));
  const Var r = ad::sigmoid(ad::add(linear(b, in, p.wr, p.br), ad::matmul(hidden, b[p.ur])));
  const Var cand = ad::tanh(ad::add(linear(b, in, p.wh, p.bh), ad::matmul(ad::mul(r, hidden), b[p.uh])));
  hidden = ad::add(hidden, ad::mul(z, ad::sub(cand, hidden)));

  OrderGeometry g;
  g.omega = unit_rows(ad::add(linear(b, hidden, p.w_omega, p.b_omega), prev.omega), "incident direction");
  g.d_hat = ad::add(prev.d_hat, ad::softplus(linear(b, hidden, p.w_d, p.b_d)) * d_scale);
  g.eta = ad::sigmoid(linear(b, hidden, p.w_eta, p.b_eta));
  return g;
}

SignalParams add_signal_params(ParamStore& store, int order, int feature_dim, int width, int blocks, Rng& rng) {
  SignalParams p;
  const std::string pre = "sig" + std::to_string(order);
  const auto in = static_cast<std::size_t>(feature_dim) + kSignalExtraDim;
  const auto w = static_cast<std::size_t>(width);
  p.w_in = store.add(pre + ".w_in", xavier(rng, in, w));
  p.b_in = store.add(pre + ".b_in", Tensor(1, w));
  for (int k = 0; k < blocks; ++k) {
    const std::string bp = pre + ".block" + std::to_string(k);
    p.blocks.push_back({store.add(bp + ".w1", xavier(rng, w, w)), store.add(bp + ".b1", Tensor(1, w)),
                        store.add(bp + ".w2", xavier(rng, w, w, 0.5)), store.add(bp + ".b2", Tensor(1, w))});
  }
  p.w_out = store.add(pre + ".w_out", Tensor(w, 2));
  p.b_out = store.add(pre + ".b_out", Tensor(1, 2));
  return p;
}

Var signal_conditioning(Var mu, const OrderGeometry& g, const std::array<double, kFreqEmbedDim>& ef, const Vec3& rx,
                        const Vec3& bounds_min, double bounds_edge, double d_scale) {
  ad::Tape& tape = *mu.tape;
  const std::size_t M = mu.rows();
  const double lo[3] = {bounds_min.x, bounds_min.y, bounds_min.z};
  const double r[3] = {rx.x, rx.y, rx.z};
  const Var mu_unit = ad::sub(mu, tape.constant(Tensor::row(lo))) * (1.0 / bounds_edge);
  const Var to_rx = unit_rows(ad::sub(tape.constant(Tensor::row(r)), mu), "Gaussian coincides with the receiver");
  return ad::concat_cols({tape.constant(broadcast_row(M, ef)), mu_unit, g.omega, g.d_hat * (1.0 / d_scale), to_rx});
}

ad::CVar signal_head(const Bound& b, const SignalParams& p, Var x, Var conditioning) {
  Var h = ad::tanh(linear(b, ad::concat_cols({x, conditioning}), p.w_in, p.b_in));
  for (const auto& blk : p.blocks) {
    const Var inner = ad::tanh(linear(b, h, blk[0], blk[1]));
    h = ad::add(h, linear(b, inner, blk[2], blk[3]));
  }
  const Var out = linear(b, h, p.w_out, p.b_out);
  return {ad::slice_cols(out, 0, 1), ad::slice_cols(out, 1, 2)};
}

}  // namespace ockm::model
