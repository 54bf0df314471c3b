// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <vector>

#include "common/vec3.hpp"

namespace ockm::render {

using cplx = std::complex<double>;
using CVector = std::vector<cplx>;

inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr double kGainFloorDb = -300.0;

// Throws DomainError for non-positive or non-finite f.
double wavelength(double frequency_hz);

// Element displacements relative to the array center, in the world x-y plane.
struct ArrayGeometry {
  std::vector<Vec3> elements;
  std::size_t size() const { return elements.size(); }
};

// rows x cols grid with the given spacing, centered at the origin.
ArrayGeometry planar_array(int rows, int cols, double spacing);
// Half-wavelength grid at the given wavelength.
ArrayGeometry half_wave_array(int rows, int cols, double lambda);

// b_k = exp(+j 2pi/lambda p_k . w)
CVector steering_vector(const Vec3& direction, const ArrayGeometry& geom, double lambda);

// Spherical Fibonacci directions on the upper hemisphere:
// z_i = 1 - (i + 0.5)/P, phi_i = 2 pi i / golden mod 2 pi.
std::vector<Vec3> sfg_directions(int count);

// argmax_p <dir, w_p>, lower index on ties.
int nearest_direction(const Vec3& dir, const std::vector<Vec3>& directions);

// Unit vector from elevation theta (from the horizon) and azimuth phi, radians.
Vec3 direction_from_angles(double elevation, double azimuth);

// Bin centers of the V x Z spectrum grid, row-major (v, z):
// theta_v = (v + 0.5) 90/V deg, phi_z = (z + 0.5) 360/Z deg.
std::vector<Vec3> spectrum_grid(int V, int Z);

// I_{v,z} = |b(theta_v, phi_z)^H h|^2, row-major.
std::vector<double> spectrum(const CVector& h, const ArrayGeometry& geom, double lambda, int V, int Z);

// 10 log10 ||h||^2 floored at kGainFloorDb.
double gain_db(const CVector& h);
double power_to_db(double power);

// 10 log10(N_a (lambda / 4 pi d)^2)
double free_space_gain_db(double distance, double lambda, std::size_t elements);

}  // namespace ockm::render
