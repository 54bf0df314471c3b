// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <vector>

#include "autodiff/ops.hpp"
#include "render/array.hpp"

namespace ockm::render {

// Per-primitive rendering inputs on a tape: mu (M x 3), raw quaternion
// (M x 4, normalized inside), log_scale (M x 3), alpha (M x 1) and
// sigmoid(gamma_raw) (M x 1).
struct SceneVars {
  ad::Var mu;
  ad::Var quat;
  ad::Var log_scale;
  ad::Var alpha;
  ad::Var gamma_sigmoid;

  std::size_t count() const { return mu.rows(); }
};

// Segment a -> b. With moving >= 0 the b endpoint is mu[moving] and follows
// its gradient. Primitive `exclude` does not attenuate the segment.
struct Segment {
  Vec3 a;
  Vec3 b;
  int moving = -1;
  int exclude = -1;
};

// Fused complex transmittance for S segments, returned as S x 1 re/im.
ad::CVar segment_transmittance(const SceneVars& scene, const std::vector<Segment>& segments);

// Constant steering tables shared by every sample. With half-wavelength
// spacing the steering vectors do not depend on the carrier.
struct SteeringTables {
  int rows = 4, cols = 4;
  std::vector<Vec3> directions;         // rendering directions (SFG)
  std::shared_ptr<const ad::Tensor> dir_re, dir_im;    // N_a x P, column p = b(w_p)
  std::shared_ptr<const ad::Tensor> spec_re, spec_im;  // VZ x N_a, row i = b(grid_i)^H
  int V = 0, Z = 0;

  std::size_t antennas() const { return static_cast<std::size_t>(rows * cols); }
  ArrayGeometry geometry(double lambda) const { return half_wave_array(rows, cols, lambda); }
};

SteeringTables make_tables(int rows, int cols, int directions, int V, int Z);

struct Query {
  Vec3 tx;
  Vec3 rx;
  double frequency = 0.0;
};

// LoS component (N_a x 1). Throws DomainError for coincident endpoints.
ad::CVar render_los(const SceneVars& scene, const Query& q, const SteeringTables& tables);

// Theta_Tx (Tx -> mu_m) and Theta_Rx (mu_m -> Rx, excluding m), M x 1 each.
ad::CVar tx_transmittance(const SceneVars& scene, const Vec3& tx);
ad::CVar rx_transmittance(const SceneVars& scene, const Vec3& rx);

// Nearest rendering direction of each primitive as seen from rx.
std::vector<int> direction_bins(const SceneVars& scene, const Vec3& rx, const std::vector<Vec3>& directions);

struct OrderInputs {
  ad::Var d_hat;     // M x 1, meters
  ad::Var eta;       // M x 1
  ad::CVar signal;   // M x 1
  bool has_tx_factor = false;
  ad::CVar theta_tx; // used when has_tx_factor
  ad::CVar theta_rx;
};

// Per-primitive complex coefficients s_m (M x 1) before direction binning.
ad::CVar order_coefficients(const SceneVars& scene, const OrderInputs& in, const Query& q);

// h^n = sum_p (sum_{bin(m) = p} s_m) b(w_p), N_a x 1.
ad::CVar render_order(const SceneVars& scene, const OrderInputs& in, const Query& q, const SteeringTables& tables);

// |b^H h|^2 over the spectrum grid (VZ x 1).
ad::Var spectrum_var(const ad::CVar& h, const SteeringTables& tables);

// 10 log10(||h||^2 + 1e-30).
ad::Var gain_db_var(const ad::CVar& h);

CVector to_cvector(const ad::CVar& h);

}  // namespace ockm::render
