// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>

#include "../support/test_meshes.hpp"
#include "tsegformer/error.hpp"
#include "tsegformer/io_util.hpp"
#include "tsegformer/mesh.hpp"

using namespace tseg;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected tseg::Error");
  return ErrorCode::io;
}

}  // namespace

TEST_CASE("obj parsing handles comments, polygons and relative indices") {
  const std::string text =
      "# quad split into two triangles\n"
      "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\n"
      "vn 0 0 1\n"
      "f 1//1 2//1 3//1 4//1\n"
      "f -4 -2 -1\n";
  const TriMesh m = parse_mesh(text, MeshFormat::obj);
  CHECK(m.vertex_count() == 4);
  CHECK(m.face_count() == 3);
  CHECK(m.total_area() == doctest::Approx(1.5));
  for (const Vec3& n : m.face_normal) CHECK(n.z() == doctest::Approx(1.0));
}

TEST_CASE("obj round trip keeps topology") {
  const TriMesh a = tseg::testing::icosphere(1);
  const TriMesh b = parse_mesh(format_obj(a), MeshFormat::obj);
  REQUIRE(b.face_count() == a.face_count());
  CHECK(b.faces == a.faces);
  for (std::size_t i = 0; i < a.vertex_count(); ++i) CHECK((a.vertices[i] - b.vertices[i]).norm() < 1e-5);
}

TEST_CASE("ascii ply and stl") {
  const std::string ply =
      "ply\nformat ascii 1.0\nelement vertex 3\nproperty float x\nproperty float y\nproperty float z\n"
      "element face 1\nproperty list uchar int vertex_indices\nend_header\n0 0 0\n2 0 0\n0 2 0\n3 0 1 2\n";
  CHECK(parse_mesh(ply, MeshFormat::ply).total_area() == doctest::Approx(2.0));
  const std::string stl =
      "solid t\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\nendloop\nendfacet\n"
      "facet normal 0 0 1\nouter loop\nvertex 1 0 0\nvertex 1 1 0\nvertex 0 1 0\nendloop\nendfacet\nendsolid t\n";
  const TriMesh s = parse_mesh(stl, MeshFormat::stl);
  CHECK(s.face_count() == 2);
  CHECK(s.vertex_count() == 4);  // coincident STL corners are welded
  CHECK(build_adjacency(s).first_order[0].size() == 1);
}

TEST_CASE("malformed input reports an error code") {
  CHECK(code_of([] { parse_mesh("v 0 0 0\nf 1 2 3\n", MeshFormat::obj); }) == ErrorCode::validation);
  CHECK(code_of([] { parse_mesh("v 0 zero 0\n", MeshFormat::obj); }) == ErrorCode::parse);
  CHECK(code_of([] { load_mesh("/nonexistent/mesh.obj"); }) == ErrorCode::io);
  CHECK(code_of([] { mesh_format_from_path("mesh.xyz"); }) == ErrorCode::invalid_argument);
}

TEST_CASE("degenerate faces are dropped and traced") {
  std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {2, 0, 0}};
  MeshBuildReport report;
  const TriMesh m = make_mesh(v, {{0, 1, 2}, {0, 1, 3}, {1, 2, 0}}, &report);
  CHECK(m.face_count() == 2);
  REQUIRE(report.dropped_faces.size() == 1);
  CHECK(report.dropped_faces[0] == 1);
  CHECK(m.source_face == std::vector<std::size_t>{0, 2});
}

TEST_CASE("adjacency on a flat grid") {
  const TriMesh grid = tseg::testing::flat_grid(6, 6);
  const FaceAdjacency adj = build_adjacency(grid);
  REQUIRE(adj.first_order.size() == grid.face_count());
  std::size_t interior = 0;
  for (std::size_t f = 0; f < grid.face_count(); ++f) {
    const auto first = adj.first_order[f];
    CHECK(first.size() <= 3);
    interior += first.size() == 3;
    CHECK(std::is_sorted(first.begin(), first.end()));
    for (std::uint32_t g : first) {
      const auto back = adj.first_order[g];
      CHECK(std::find(back.begin(), back.end(), f) != back.end());
    }
    const auto second = adj.second_order[f];
    CHECK(std::find(second.begin(), second.end(), f) == second.end());
    for (std::uint32_t g : first) CHECK(std::find(second.begin(), second.end(), g) != second.end());
  }
  CHECK(interior > 0);
  const std::vector<bool> boundary = boundary_vertices(grid);
  CHECK(std::count(boundary.begin(), boundary.end(), true) == 20);
}

TEST_CASE("closed sphere has no boundary and every face has three neighbors") {
  const TriMesh s = tseg::testing::icosphere(2);
  const FaceAdjacency adj = build_adjacency(s);
  for (std::size_t f = 0; f < s.face_count(); ++f) CHECK(adj.first_order[f].size() == 3);
  const std::vector<bool> boundary = boundary_vertices(s);
  CHECK(std::none_of(boundary.begin(), boundary.end(), [](bool b) { return b; }));
}

TEST_CASE("labels sidecar round trip") {
  const auto path = std::filesystem::temp_directory_path() / "tseg_unit_labels.labels";
  write_labels(path, {0, 5, 32});
  CHECK(read_labels(path) == std::vector<int>{0, 5, 32});
  std::filesystem::remove(path);
}
