// SPDX-License-Identifier: Apache-2.0
#include "render/gaussian.hpp"

#include <numbers>

namespace ockm::render {

std::complex<double> transmittance(const Vec3& a, const Vec3& b, const std::vector<Primitive>& prims, int exclude) {
  double amplitude = 1.0;
  double phase = 0.0;
  for (std::size_t k = 0; k < prims.size(); ++k) {
    if (static_cast<int>(k) == exclude) continue;
    const double G = project_gaussian(a, b, prims[k]);
    amplitude *= 1.0 - prims[k].alpha * G;
    phase -= 2.0 * std::numbers::pi * prims[k].gamma_sigmoid * G;
  }
  return std::polar(amplitude, phase);
}

}  // namespace ockm::render
