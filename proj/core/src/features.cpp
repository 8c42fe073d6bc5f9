// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "tsegformer/error.hpp"
#include "tsegformer/geometry.hpp"
#include "tsegformer/rng.hpp"

namespace tseg {

const char* to_string(Jaw jaw) { return jaw == Jaw::maxillary ? "maxillary" : "mandible"; }

Jaw parse_jaw(const std::string& name) {
  if (name == "maxillary" || name == "upper") return Jaw::maxillary;
  if (name == "mandible" || name == "lower") return Jaw::mandible;
  throw Error(ErrorCode::invalid_argument, "unknown jaw '" + name + "' (expected maxillary or mandible)");
}

Eigen::Vector2d FeatureCloud::category() const {
  return jaw == Jaw::maxillary ? Eigen::Vector2d(1.0, 0.0) : Eigen::Vector2d(0.0, 1.0);
}

const std::vector<double>& FeatureCloud::raw_curvature(CurvatureKind kind) const {
  switch (kind) {
    case CurvatureKind::gaussian: return raw_gaussian;
    case CurvatureKind::mean: return raw_mean;
    case CurvatureKind::point: return raw_point;
  }
  return raw_point;
}

FeatureCloud build_features(const TriMesh& mesh, const FaceAdjacency& adj, Jaw jaw,
                            const FeatureOptions& options) {
  const std::size_t n = mesh.face_count();
  FeatureCloud cloud;
  cloud.jaw = jaw;
  cloud.features.resize(static_cast<Eigen::Index>(n), kFeatureDim);
  cloud.source_face.resize(n);
  cloud.raw_point = point_curvature(mesh, adj).values;
  cloud.raw_gaussian = gaussian_curvature(mesh).values;
  cloud.raw_mean = mean_curvature(mesh).values;

  Vec3 center = Vec3::Zero();
  double scale = 1.0;
  if (options.normalize_coordinates && n > 0) {
    for (const Vec3& c : mesh.face_centroid) center += c;
    center /= static_cast<double>(n);
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const Vec3& c : mesh.face_centroid) {
      lo = lo.cwiseMin(c);
      hi = hi.cwiseMax(c);
    }
    const double extent = (hi - lo).maxCoeff();
    if (extent > 0.0) scale = 1.0 / extent;
  }

  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    const Vec3 p = (mesh.face_centroid[i] - center) * scale;
    cloud.features(r, kColX) = p.x();
    cloud.features(r, kColY) = p.y();
    cloud.features(r, kColZ) = p.z();
    cloud.features(r, kColNx) = mesh.face_normal[i].x();
    cloud.features(r, kColNy) = mesh.face_normal[i].y();
    cloud.features(r, kColNz) = mesh.face_normal[i].z();
    cloud.features(r, kColGaussian) =
        std::clamp(cloud.raw_gaussian[i], -kGaussianClamp, kGaussianClamp) / kGaussianClamp;
    cloud.features(r, kColPoint) = cloud.raw_point[i] / std::numbers::pi;
    cloud.source_face[i] = i;
  }
  return cloud;
}

FeatureCloud select_rows(const FeatureCloud& cloud, const std::vector<std::size_t>& rows) {
  FeatureCloud out;
  out.jaw = cloud.jaw;
  out.padded = cloud.padded;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), kFeatureDim);
  out.source_face.reserve(rows.size());
  out.raw_point.reserve(rows.size());
  out.raw_gaussian.reserve(rows.size());
  out.raw_mean.reserve(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t r = rows[k];
    if (r >= cloud.size()) throw Error(ErrorCode::invalid_argument, "row index out of range in select_rows");
    out.features.row(static_cast<Eigen::Index>(k)) = cloud.features.row(static_cast<Eigen::Index>(r));
    out.source_face.push_back(cloud.source_face[r]);
    out.raw_point.push_back(cloud.raw_point[r]);
    out.raw_gaussian.push_back(cloud.raw_gaussian[r]);
    out.raw_mean.push_back(cloud.raw_mean[r]);
  }
  return out;
}

namespace {

std::vector<std::size_t> farthest_point_rows(const FeatureCloud& cloud, std::size_t n, Rng& rng) {
  const std::size_t total = cloud.size();
  std::vector<std::size_t> rows;
  rows.reserve(n);
  std::vector<double> dist(total, std::numeric_limits<double>::infinity());
  std::size_t current = rng.index(total);
  for (std::size_t k = 0; k < n; ++k) {
    rows.push_back(current);
    const auto p = cloud.features.row(static_cast<Eigen::Index>(current)).head<3>();
    std::size_t best = 0;
    double best_d = -1.0;
    for (std::size_t i = 0; i < total; ++i) {
      const double d = (cloud.features.row(static_cast<Eigen::Index>(i)).head<3>() - p).squaredNorm();
      dist[i] = std::min(dist[i], d);
      if (dist[i] > best_d) {
        best_d = dist[i];
        best = i;
      }
    }
    current = best;
  }
  return rows;
}

}  // namespace

FeatureCloud downsample(const FeatureCloud& cloud, std::size_t n, std::uint64_t seed, SamplingMethod method) {
  if (n == 0) throw Error(ErrorCode::invalid_argument, "downsample size must be positive");
  if (cloud.size() == 0) throw Error(ErrorCode::invalid_argument, "cannot downsample an empty cloud");
  Rng rng(seed);
  std::vector<std::size_t> rows;
  bool padded = false;
  if (n <= cloud.size()) {
    if (method == SamplingMethod::farthest_point) {
      rows = farthest_point_rows(cloud, n, rng);
    } else {
      rows = permutation(cloud.size(), rng);
      rows.resize(n);
    }
  } else {
    rows = permutation(cloud.size(), rng);
    while (rows.size() < n) rows.push_back(rng.index(cloud.size()));
    padded = true;
  }
  FeatureCloud out = select_rows(cloud, rows);
  out.padded = cloud.padded || padded;
  return out;
}

}  // namespace tseg
