// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "tsegformer/mesh.hpp"

namespace tseg {

enum class CurvatureKind { gaussian, mean, point };

const char* to_string(CurvatureKind kind);
CurvatureKind parse_curvature_kind(const std::string& name);

/// Per-face scalar curvature. Units: gaussian mm^-2, mean mm^-1, point radians.
struct CurvatureField {
  CurvatureKind kind = CurvatureKind::point;
  std::vector<double> values;
  /// Vertices treated with the boundary rule (gaussian and mean only).
  std::size_t boundary_vertex_count = 0;
};

/// Mean angle between a face normal and the normals of its neighborhood
/// (adj.second_order). Faces without neighbors get 0. Values lie in [0, pi].
CurvatureField point_curvature(const TriMesh& mesh, const FaceAdjacency& adj);

/// Raw per-vertex angle deficit: 2*pi - sum of incident angles for interior
/// vertices, pi - sum for boundary vertices.
std::vector<double> vertex_angle_deficit(const TriMesh& mesh);

/// Angle deficit over one third of the incident area, averaged onto faces.
CurvatureField gaussian_curvature(const TriMesh& mesh);

/// Magnitude of the cotangent Laplacian of the embedding over the
/// barycentric vertex area, halved, averaged onto faces. Boundary vertices use
/// only the component along the vertex normal.
CurvatureField mean_curvature(const TriMesh& mesh);

enum class Jaw { maxillary, mandible };

const char* to_string(Jaw jaw);
Jaw parse_jaw(const std::string& name);

inline constexpr int kFeatureDim = 8;

/// Column layout of the per-point feature matrix.
enum FeatureColumn : int {
  kColX = 0,
  kColY,
  kColZ,
  kColNx,
  kColNy,
  kColNz,
  kColGaussian,
  kColPoint,
};

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, kFeatureDim, Eigen::RowMajor>;

/// Input point cloud for the network. Rows correspond 1:1 to `source_face`.
/// The raw_* vectors keep unscaled curvature values for hard-point ranking.
struct FeatureCloud {
  FeatureMatrix features;
  Jaw jaw = Jaw::maxillary;
  std::vector<std::size_t> source_face;
  std::vector<double> raw_point;
  std::vector<double> raw_gaussian;
  std::vector<double> raw_mean;
  /// Set when rows were resampled with replacement to reach the requested size.
  bool padded = false;

  std::size_t size() const { return static_cast<std::size_t>(features.rows()); }
  /// One-hot jaw category: (1,0) maxillary, (0,1) mandible.
  Eigen::Vector2d category() const;
  const std::vector<double>& raw_curvature(CurvatureKind kind) const;
};

/// Scaling applied to curvature columns.
inline constexpr double kGaussianClamp = 100.0;

struct FeatureOptions {
  bool normalize_coordinates = true;
};

/// Full-resolution features, one row per face. Coordinates are centered at the
/// centroid of the face centroids and divided by the largest axis extent.
FeatureCloud build_features(const TriMesh& mesh, const FaceAdjacency& adj, Jaw jaw,
                            const FeatureOptions& options = {});

/// Copies the given rows (in order) into a new cloud.
FeatureCloud select_rows(const FeatureCloud& cloud, const std::vector<std::size_t>& rows);

enum class SamplingMethod { uniform, farthest_point };

/// Exactly `n` rows. Uniform sampling draws without replacement; when
/// n > cloud.size() every row is kept and the rest are drawn with replacement
/// (and `padded` is set). Throws for n == 0.
FeatureCloud downsample(const FeatureCloud& cloud, std::size_t n, std::uint64_t seed,
                        SamplingMethod method = SamplingMethod::uniform);

}  // namespace tseg
