// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "tsegformer/geometry.hpp"
#include "tsegformer/mesh.hpp"

namespace tseg {

inline constexpr int kNumClasses = 33;
inline constexpr int kGingivaClass = 0;

/// Class ids: 0 gingiva; 1-16 maxillary FDI 11-18, 21-28; 17-32 mandibular
/// FDI 31-38, 41-48. Throws for codes outside those quadrants.
int fdi_to_class(int fdi);
int class_to_fdi(int class_id);

/// Parameters of the synthetic arch used in place of real scans. The surface
/// is a strip that follows a parabolic arch; teeth are superelliptic crowns
/// rising from a gum ridge with a near-vertical wall at their margin.
struct SyntheticJawSpec {
  int tooth_count = 14;               // even, 2..16, split evenly between the two quadrants
  double arch_width = 50.0;           // mm, nominal
  double arch_depth = 40.0;           // mm, nominal
  double strip_width = 11.0;          // mm, buccal to lingual
  double gum_height = 2.5;            // mm
  double tooth_height_min = 4.5;      // mm
  double tooth_height_max = 7.0;      // mm
  double shape_jitter = 0.08;         // relative randomization of arch width/depth and tooth sizes
  double max_rotation_deg = 8.0;      // random in-plane rotation of the scan
  int resolution_along = 160;         // grid samples along the arch
  int resolution_across = 28;         // grid samples across the strip
  double missing_tooth_probability = 0.0;
  int missing_tooth_count = 1;        // teeth removed when the missing-tooth draw fires
  double vertex_noise = 0.0;          // mm, isotropic Gaussian
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticJaw {
  TriMesh mesh;
  std::vector<int> labels;  // per face
  Jaw jaw = Jaw::maxillary;
};

/// Deterministic in `spec`. Odd seeds produce a mandible, even seeds a
/// maxillary arch. Throws Error(invalid_argument) if the grid is too coarse for
/// the tooth count.
SyntheticJaw generate_synthetic_jaw(const SyntheticJawSpec& spec);

}  // namespace tseg
