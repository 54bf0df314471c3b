// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "autodiff/ops.hpp"

namespace ockm::train {

using ad::Tensor;
using ad::Var;

struct LossWeights {
  double spectrum = 1.0;  // Huber on dB spectra
  double mae = 0.5;       // gain MAE, dB
  double ssim = 0.2;      // 1 - SSIM
  double causal = 0.1;
  double decay = 0.1;
  double huber_delta = 1.0;
  double delta_d = 0.1;   // meters
  double xi = 0.1;
  double epsilon = 1e-15;
  double rho = 0.9;
  double energy_ema = 0.99;

  void validate() const;
};

inline constexpr double kDbFloor = 1e-12;
inline constexpr double kClipLowDb = -150.0;
inline constexpr double kClipHighDb = 0.0;

// 10 log10(x + 1e-12), elementwise.
Var to_db(Var power);
double to_db(double power);

// Mean Huber of the dB difference.
Var spectrum_huber(Var pred_power, const Tensor& target_power, double delta);

// Spectrum power (VZ x 1, row-major grid) to a V x Z image in [0, 1] after
// clipping to [-150, 0] dB.
Var spectrum_image(Var power, std::size_t v, std::size_t z);
Tensor spectrum_image(const Tensor& power, std::size_t v, std::size_t z);

// Mean local SSIM, 11x11 Gaussian window (sigma 1.5), K1 = 0.01, K2 = 0.03,
// dynamic range 1, valid positions only. Images smaller than the window use a
// uniform window of min(dim, 11) per axis.
Var ssim(Var x, Var y);
double ssim(const Tensor& x, const Tensor& y);

// Sum over n >= 2 of mean relu(delta_d - (d^n - d^(n-1))).
Var causal_loss(const std::vector<Var>& d_hat, double delta_d);

// Sum over n >= 2 of relu(e_n / (max(e_(n-1), xi * ebar_(n-1)) + eps) - rho).
// energies[i] is the 1x1 energy of order i + 1, ebar likewise.
Var decay_loss(const std::vector<Var>& energies, const std::vector<double>& ebar, double xi, double eps, double rho);

double mean_abs_error(const std::vector<double>& pred, const std::vector<double>& target);
// MAE / mean |target|.
double nmae(double mae, const std::vector<double>& target);

}  // namespace ockm::train
