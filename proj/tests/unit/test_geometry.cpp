// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <numbers>
#include <set>

#include "../support/test_meshes.hpp"
#include "tsegformer/geometry.hpp"

using namespace tseg;
using tseg::testing::flat_grid;
using tseg::testing::icosphere;

TEST_CASE("flat surfaces have zero curvature of every kind") {
  const TriMesh grid = flat_grid(9, 7);
  // Faces touching the rim carry the boundary deficit; interior faces are flat.
  const std::vector<bool> rim = boundary_vertices(grid);
  const std::vector<double> k = gaussian_curvature(grid).values;
  for (std::size_t f = 0; f < grid.face_count(); ++f) {
    const Face& t = grid.faces[f];
    if (!rim[t[0]] && !rim[t[1]] && !rim[t[2]]) CHECK(std::abs(k[f]) < 1e-12);
  }
  for (double v : mean_curvature(grid).values) CHECK(std::abs(v) < 1e-12);
  const CurvatureField m = point_curvature(grid, build_adjacency(grid));
  for (double v : m.values) CHECK(v == 0.0);
}

TEST_CASE("boundary vertices are counted by the boundary rule") {
  const TriMesh grid = flat_grid(5, 5);
  CHECK(gaussian_curvature(grid).boundary_vertex_count == 16);
  CHECK(mean_curvature(grid).boundary_vertex_count == 16);
  // A flat disk: boundary deficits sum to 2 pi, interior deficits vanish.
  double total = 0.0;
  for (double d : vertex_angle_deficit(grid)) total += d;
  CHECK(total == doctest::Approx(2.0 * std::numbers::pi));
}

TEST_CASE("sphere curvature scales with the radius") {
  for (double r : {0.5, 1.0, 4.0}) {
    const TriMesh s = icosphere(4, r);
    double k = 0.0, h = 0.0;
    for (double v : gaussian_curvature(s).values) k += v;
    for (double v : mean_curvature(s).values) h += v;
    k /= static_cast<double>(s.face_count());
    h /= static_cast<double>(s.face_count());
    CHECK(k == doctest::Approx(1.0 / (r * r)).epsilon(0.05));
    CHECK(h == doctest::Approx(1.0 / r).epsilon(0.05));
  }
}

TEST_CASE("point curvature of a cube edge") {
  // Two perpendicular faces: each face sees the other at a right angle.
  std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 1, 1}, {1, 1, 1}};
  const TriMesh m = make_mesh(v, {{0, 1, 2}, {0, 2, 3}, {3, 2, 5}, {3, 5, 4}});
  const CurvatureField pc = point_curvature(m, build_adjacency(m));
  CHECK(pc.values[1] == doctest::Approx((0.0 + std::numbers::pi / 2 + std::numbers::pi / 2) / 3.0));
}

TEST_CASE("feature columns") {
  const TriMesh s = tseg::testing::transformed(icosphere(2, 3.0), Eigen::Matrix3d::Identity(), Vec3(10, -4, 2));
  const FaceAdjacency adj = build_adjacency(s);
  const FeatureCloud c = build_features(s, adj, Jaw::mandible);
  REQUIRE(c.size() == s.face_count());
  CHECK(c.category() == Eigen::Vector2d(0, 1));
  CHECK(c.features.leftCols(3).colwise().mean().norm() < 1e-12);
  const double extent = (c.features.leftCols(3).colwise().maxCoeff() - c.features.leftCols(3).colwise().minCoeff()).maxCoeff();
  CHECK(extent == doctest::Approx(1.0));
  const std::vector<double> m = point_curvature(s, adj).values;
  const std::vector<double> k = gaussian_curvature(s).values;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    CHECK(c.features.row(row).segment(kColNx, 3).norm() == doctest::Approx(1.0));
    CHECK(c.features(row, kColPoint) == doctest::Approx(m[i] / std::numbers::pi));
    CHECK(c.features(row, kColGaussian) == doctest::Approx(std::clamp(k[i], -100.0, 100.0) / 100.0));
    CHECK(c.raw_point[i] == m[i]);
    CHECK(c.source_face[i] == i);
  }
  CHECK(&c.raw_curvature(CurvatureKind::gaussian) == &c.raw_gaussian);
}

TEST_CASE("downsampling") {
  const TriMesh s = icosphere(2);
  const FeatureCloud full = build_features(s, build_adjacency(s), Jaw::maxillary);
  SUBCASE("uniform draws distinct rows deterministically") {
    const FeatureCloud a = downsample(full, 100, 5);
    const FeatureCloud b = downsample(full, 100, 5);
    CHECK(a.size() == 100);
    CHECK(a.source_face == b.source_face);
    CHECK(std::set<std::size_t>(a.source_face.begin(), a.source_face.end()).size() == 100);
    CHECK_FALSE(a.padded);
    CHECK(downsample(full, 100, 6).source_face != a.source_face);
  }
  SUBCASE("oversampling pads with replacement") {
    const FeatureCloud p = downsample(full, full.size() + 30, 1);
    CHECK(p.size() == full.size() + 30);
    CHECK(p.padded);
    CHECK(std::set<std::size_t>(p.source_face.begin(), p.source_face.end()).size() == full.size());
  }
  SUBCASE("farthest point sampling spreads out") {
    const FeatureCloud f = downsample(full, 20, 1, SamplingMethod::farthest_point);
    CHECK(std::set<std::size_t>(f.source_face.begin(), f.source_face.end()).size() == 20);
  }
  SUBCASE("rows are copied with their raw curvature") {
    const FeatureCloud r = select_rows(full, {3, 1});
    CHECK(r.raw_point[0] == full.raw_point[3]);
    CHECK(r.features.row(1) == full.features.row(1));
  }
  CHECK_THROWS(downsample(full, 0, 1));
}

TEST_CASE("knn neighborhood alternative") {
  const TriMesh s = icosphere(2);
  const FaceAdjacency adj = build_knn_neighborhood(s, 8);
  for (std::size_t f = 0; f < s.face_count(); ++f) {
    CHECK(adj.second_order[f].size() == 8);
    const auto row = adj.second_order[f];
    CHECK(std::find(row.begin(), row.end(), f) == row.end());
  }
}

TEST_CASE("name parsing") {
  CHECK(parse_jaw("mandible") == Jaw::mandible);
  CHECK(parse_curvature_kind("mean") == CurvatureKind::mean);
  CHECK_THROWS(parse_jaw("upper-left"));
}
