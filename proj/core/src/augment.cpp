// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <numbers>

#include "tsegformer/rng.hpp"
#include "tsegformer/training.hpp"

namespace tseg {

FeatureCloud augment(const FeatureCloud& cloud, const AugmentConfig& config, std::uint64_t seed) {
  FeatureCloud out = cloud;
  Rng rng(derive_seed(seed, 0x61756720));
  const double angle = config.rotation_deg * std::numbers::pi / 180.0 * rng.uniform(-1.0, 1.0);
  const double tx = config.translation * rng.uniform(-1.0, 1.0);
  const double ty = config.translation * rng.uniform(-1.0, 1.0);
  const double tz = config.translation * rng.uniform(-1.0, 1.0);
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  for (Eigen::Index i = 0; i < out.features.rows(); ++i) {
    auto row = out.features.row(i);
    const double x = row(kColX), y = row(kColY);
    row(kColX) = c * x - s * y + tx;
    row(kColY) = s * x + c * y + ty;
    row(kColZ) += tz;
    if (config.jitter > 0) {
      row(kColX) += config.jitter * rng.normal();
      row(kColY) += config.jitter * rng.normal();
      row(kColZ) += config.jitter * rng.normal();
    }
    const double nx = row(kColNx), ny = row(kColNy);
    row(kColNx) = c * nx - s * ny;
    row(kColNy) = s * nx + c * ny;
  }
  return out;
}

}  // namespace tseg
