// SPDX-License-Identifier: Apache-2.0
#include "train/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "common/error.hpp"

namespace ockm::train {

void LossWeights::validate() const {
  for (double w : {spectrum, mae, ssim, causal, decay, delta_d, xi})
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("loss weights must be finite and nonnegative");
  if (!(huber_delta > 0.0)) throw ConfigError("huber_delta must be positive");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError("rho must be in (0, 1]");
  if (!(energy_ema >= 0.0 && energy_ema < 1.0)) throw ConfigError("energy_ema must be in [0, 1)");
}

namespace {

constexpr double kDbScale = 10.0 / std::numbers::ln10;
constexpr std::size_t kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

// Banded (n - w + 1) x n matrix applying the normalized 1-D window.
Tensor window_matrix(std::size_t n, bool gaussian) {
  const std::size_t w = std::min(n, kWindow);
  std::vector<double> k(w, 1.0);
  if (gaussian) {
    const double c = 0.5 * static_cast<double>(w - 1);
    for (std::size_t i = 0; i < w; ++i) {
      const double d = static_cast<double>(i) - c;
      k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    }
  }
  double s = 0.0;
  for (double x : k) s += x;
  Tensor m(n - w + 1, n);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t i = 0; i < w; ++i) m(r, r + i) = k[i] / s;
  return m;
}

}  // namespace

Var to_db(Var power) { return ad::log(ad::add(power, kDbFloor)) * kDbScale; }
double to_db(double power) { return kDbScale * std::log(power + kDbFloor); }

Var spectrum_huber(Var pred_power, const Tensor& target_power, double delta) {
  if (!pred_power.value().same_shape(target_power)) throw DimensionError("spectrum grid mismatch");
  Tensor target_db(target_power.rows, target_power.cols);
  for (std::size_t i = 0; i < target_power.size(); ++i) target_db[i] = to_db(target_power[i]);
  const Var diff = ad::sub(to_db(pred_power), pred_power.tape->constant(std::move(target_db)));
  return ad::mean(ad::huber(diff, delta));
}

Var spectrum_image(Var power, std::size_t v, std::size_t z) {
  const Var db = ad::clamp(to_db(power), kClipLowDb, kClipHighDb);
  return ad::reshape(ad::add(db, -kClipLowDb) * (1.0 / (kClipHighDb - kClipLowDb)), v, z);
}

Tensor spectrum_image(const Tensor& power, std::size_t v, std::size_t z) {
  if (power.size() != v * z) throw DimensionError("spectrum size does not match the grid");
  Tensor out(v, z);
  for (std::size_t i = 0; i < power.size(); ++i)
    out[i] = (std::clamp(to_db(power[i]), kClipLowDb, kClipHighDb) - kClipLowDb) / (kClipHighDb - kClipLowDb);
  return out;
}

Var ssim(Var x, Var y) {
  const Tensor& xv = x.value();
  if (!xv.same_shape(y.value())) throw DimensionError("SSIM images differ in shape");
  if (xv.empty()) throw DimensionError("SSIM of an empty image");
  ad::Tape& tape = *x.tape;
  const bool gaussian = xv.rows >= kWindow && xv.cols >= kWindow;
  const Var A = tape.constant(window_matrix(xv.rows, gaussian));
  const Tensor B = window_matrix(xv.cols, gaussian);
  Tensor bt(B.cols, B.rows);
  for (std::size_t i = 0; i < B.rows; ++i)
    for (std::size_t j = 0; j < B.cols; ++j) bt(j, i) = B(i, j);
  const Var Bt = tape.constant(std::move(bt));
  auto filt = [&](Var img) { return ad::matmul(ad::matmul(A, img), Bt); };
  const Var mx = filt(x), my = filt(y);
  const Var mx2 = ad::square(mx), my2 = ad::square(my), mxy = ad::mul(mx, my);
  const Var sx = ad::sub(filt(ad::square(x)), mx2);
  const Var sy = ad::sub(filt(ad::square(y)), my2);
  const Var sxy = ad::sub(filt(ad::mul(x, y)), mxy);
  const Var num = ad::mul(ad::add(mxy * 2.0, kC1), ad::add(sxy * 2.0, kC2));
  const Var den = ad::mul(ad::add(ad::add(mx2, my2), kC1), ad::add(ad::add(sx, sy), kC2));
  return ad::mean(ad::div(num, den));
}

double ssim(const Tensor& x, const Tensor& y) {
  ad::Tape tape;
  return ssim(tape.constant(x), tape.constant(y)).item();
}

Var causal_loss(const std::vector<Var>& d_hat, double delta_d) {
  if (d_hat.empty()) throw DimensionError("causal loss needs at least one order");
  Var total = d_hat.front().tape->constant(0.0);
  for (std::size_t n = 1; n < d_hat.size(); ++n)
    total = ad::add(total, ad::mean(ad::relu(ad::rsub(delta_d, ad::sub(d_hat[n], d_hat[n - 1])))));
  return total;
}

Var decay_loss(const std::vector<Var>& energies, const std::vector<double>& ebar, double xi, double eps, double rho) {
  if (energies.empty()) throw DimensionError("decay loss needs at least one order");
  if (ebar.size() < energies.size()) throw DimensionError("energy EMA shorter than the order count");
  ad::Tape& tape = *energies.front().tape;
  Var total = tape.constant(0.0);
  for (std::size_t n = 1; n < energies.size(); ++n) {
    const Var ref = ad::maximum(energies[n - 1], tape.constant(xi * ebar[n - 1]));
    total = ad::add(total, ad::relu(ad::add(ad::div(energies[n], ad::add(ref, eps)), -rho)));
  }
  return total;
}

double mean_abs_error(const std::vector<double>& pred, const std::vector<double>& target) {
  if (pred.size() != target.size() || pred.empty()) throw DimensionError("MAE needs equal nonempty batches");
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
  return s / static_cast<double>(pred.size());
}

double nmae(double mae, const std::vector<double>& target) {
  if (target.empty()) throw DimensionError("NMAE of an empty set");
  double s = 0.0;
  for (double t : target) s += std::abs(t);
  return mae / (s / static_cast<double>(target.size()));
}

}  // namespace ockm::train
