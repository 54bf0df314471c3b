// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <vector>

#include "common/vec3.hpp"
#include "model/params.hpp"

namespace ockm::model {

inline constexpr std::array<double, 4> kBandScalesGhz{1.0, 4.0, 16.0, 64.0};
inline constexpr std::size_t kFreqEmbedDim = 1 + 2 * kBandScalesGhz.size();

// [f_GHz, sin(pi f/s_k), cos(pi f/s_k) for each band]. DomainError for f <= 0.
std::array<double, kFreqEmbedDim> frequency_embedding(double frequency_hz);

// Effective incident direction, path length and attenuation per Gaussian.
struct OrderGeometry {
  Var omega;  // M x 3, unit rows
  Var d_hat;  // M x 1, meters
  Var eta;    // M x 1
};

// Order 1: straight from the transmitter. DomainError when mu == tx.
OrderGeometry bypass_geometry(Var mu, const Vec3& tx);

struct GeometryParams {
  int input_dim = 0;
  int hidden = 0;
  int wz = -1, uz = -1, bz = -1;  // update gate
  int wr = -1, ur = -1, br = -1;  // reset gate
  int wh = -1, uh = -1, bh = -1;  // candidate
  int w_omega = -1, b_omega = -1;
  int w_d = -1, b_d = -1;
  int w_eta = -1, b_eta = -1;
};

GeometryParams add_geometry_params(ParamStore& store, int feature_dim, int hidden, Rng& rng);

// One GRU step for order n >= 2. The input is [x; omega; d_hat / d_scale; eta]
// of the previous order; hidden is updated in place.
OrderGeometry geometry_step(const Bound& bound, const GeometryParams& p, Var x, const OrderGeometry& prev,
                            Var& hidden, double d_scale);

struct SignalParams {
  int w_in = -1, b_in = -1;
  std::vector<std::array<int, 4>> blocks;  // w1, b1, w2, b2
  int w_out = -1, b_out = -1;
};

inline constexpr std::size_t kSignalExtraDim = kFreqEmbedDim + 3 + 3 + 1 + 3;

SignalParams add_signal_params(ParamStore& store, int order, int feature_dim, int width, int blocks, Rng& rng);

// Conditioning for the signal head besides the order feature, M x 19:
// [e_f, mu in [0,1]^3, omega, d_hat / d_scale, unit(rx - mu)].
Var signal_conditioning(Var mu, const OrderGeometry& g, const std::array<double, kFreqEmbedDim>& ef, const Vec3& rx,
                        const Vec3& bounds_min, double bounds_edge, double d_scale);

// Residual MLP on [x, conditioning]; returns (re, im) as M x 1 each.
ad::CVar signal_head(const Bound& bound, const SignalParams& p, Var x, Var conditioning);

}  // namespace ockm::model
