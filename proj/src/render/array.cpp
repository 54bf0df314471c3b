// SPDX-License-Identifier: Apache-2.0
#include "render/array.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "common/error.hpp"

namespace ockm::render {

double wavelength(double frequency_hz) {
  if (!(frequency_hz > 0.0) || !std::isfinite(frequency_hz)) {
    throw DomainError("carrier frequency must be positive, got " + std::to_string(frequency_hz));
  }
  return kSpeedOfLight / frequency_hz;
}

ArrayGeometry planar_array(int rows, int cols, double spacing) {
  if (rows < 1 || cols < 1) throw ConfigError("antenna array needs at least one row and column");
  ArrayGeometry g;
  g.elements.reserve(static_cast<std::size_t>(rows * cols));
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      g.elements.push_back({(c - 0.5 * (cols - 1)) * spacing, (r - 0.5 * (rows - 1)) * spacing, 0.0});
    }
  }
  return g;
}

ArrayGeometry half_wave_array(int rows, int cols, double lambda) { return planar_array(rows, cols, 0.5 * lambda); }

CVector steering_vector(const Vec3& direction, const ArrayGeometry& geom, double lambda) {
  const double k = 2.0 * std::numbers::pi / lambda;
  CVector b(geom.size());
  for (std::size_t i = 0; i < geom.size(); ++i) b[i] = std::polar(1.0, k * dot(geom.elements[i], direction));
  return b;
}

std::vector<Vec3> sfg_directions(int count) {
  if (count < 1) throw ConfigError("direction count must be positive");
  const double golden = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double z = 1.0 - (i + 0.5) / count;
    const double r = std::sqrt(1.0 - z * z);
    const double phi = std::fmod(2.0 * std::numbers::pi * i / golden, 2.0 * std::numbers::pi);
    out.push_back({r * std::cos(phi), r * std::sin(phi), z});
  }
  return out;
}

int nearest_direction(const Vec3& dir, const std::vector<Vec3>& directions) {
  int best = 0;
  double best_dot = -2.0;
  for (std::size_t p = 0; p < directions.size(); ++p) {
    const double d = dot(dir, directions[p]);
    if (d > best_dot) {
      best_dot = d;
      best = static_cast<int>(p);
    }
  }
  return best;
}

Vec3 direction_from_angles(double elevation, double azimuth) {
  return {std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth), std::sin(elevation)};
}

std::vector<Vec3> spectrum_grid(int V, int Z) {
  if (V < 1 || Z < 1) throw ConfigError("spectrum grid needs V, Z >= 1");
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(V * Z));
  const double deg = std::numbers::pi / 180.0;
  for (int v = 0; v < V; ++v) {
    for (int z = 0; z < Z; ++z) {
      out.push_back(direction_from_angles((v + 0.5) * 90.0 / V * deg, (z + 0.5) * 360.0 / Z * deg));
    }
  }
  return out;
}

std::vector<double> spectrum(const CVector& h, const ArrayGeometry& geom, double lambda, int V, int Z) {
  if (h.size() != geom.size()) throw DimensionError("channel length does not match the array");
  const auto grid = spectrum_grid(V, Z);
  std::vector<double> out(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const CVector b = steering_vector(grid[i], geom, lambda);
    cplx acc = 0.0;
    for (std::size_t k = 0; k < h.size(); ++k) acc += std::conj(b[k]) * h[k];
    out[i] = std::norm(acc);
  }
  return out;
}

double power_to_db(double power) {
  if (!(power > 0.0)) return kGainFloorDb;
  return std::max(kGainFloorDb, 10.0 * std::log10(power));
}

double gain_db(const CVector& h) {
  double p = 0.0;
  for (const cplx& x : h) p += std::norm(x);
  return power_to_db(p);
}

double free_space_gain_db(double distance, double lambda, std::size_t elements) {
  const double a = lambda / (4.0 * std::numbers::pi * distance);
  return 10.0 * std::log10(static_cast<double>(elements) * a * a);
}

}  // namespace ockm::render
