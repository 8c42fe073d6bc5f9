// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>

#include "tsegformer/geometry.hpp"
#include "tsegformer/inference.hpp"
#include "tsegformer/mesh.hpp"
#include "tsegformer/synthetic.hpp"

namespace tseg {

using Rgb = std::array<std::uint8_t, 3>;

/// Gingiva color (class 0).
inline constexpr Rgb kGingivaColor{0xFF, 0xC0, 0xCB};

/// Fixed per-class colors; entry 0 is kGingivaColor.
const std::array<Rgb, kNumClasses>& label_palette();

struct ExportPaths {
  std::filesystem::path obj;
  std::filesystem::path mtl;
  std::filesystem::path labels;
  std::filesystem::path aux_labels;
  std::filesystem::path probs;  // empty unless probabilities were exported
};

/// Writes `<stem>.obj` (faces grouped by `usemtl class_XX`), `<stem>.mtl`,
/// `<stem>.labels`, `<stem>.aux.labels` and, when the result carries them,
/// `<stem>.probs.csv`. `path` may carry any extension; it is replaced.
/// Throws Error(invalid_argument) if the face counts differ.
ExportPaths export_result(const SegmentationResult& result, const TriMesh& mesh, const std::filesystem::path& path);

/// "face,value" CSV with one line per face.
std::string format_field_csv(std::span<const double> values);

/// OBJ with per-vertex colors (`v x y z r g b`). Face values are averaged onto
/// vertices and mapped through a blue-white-red ramp clipped at the given
/// percentiles of |value|.
std::string format_field_obj(const TriMesh& mesh, std::span<const double> face_values, double clip_percentile = 0.95);

}  // namespace tseg
