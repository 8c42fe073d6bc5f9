// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <filesystem>
#include <set>
#include <sstream>

#include "../support/test_meshes.hpp"
#include "tsegformer/error.hpp"
#include "tsegformer/export.hpp"
#include "tsegformer/io_util.hpp"

using namespace tseg;
namespace fs = std::filesystem;

TEST_CASE("palette") {
  const auto& p = label_palette();
  CHECK(p[0] == Rgb{0xFF, 0xC0, 0xCB});
  CHECK(std::set<Rgb>(p.begin(), p.end()).size() == kNumClasses);
}

TEST_CASE("segmentation export round trip") {
  const TriMesh mesh = tseg::testing::flat_grid(4, 3);
  SegmentationResult r;
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    r.face_labels.push_back(static_cast<int>(f % 3) * 5);
    r.aux_labels.push_back(f % 3 != 0);
  }
  const fs::path dir = fs::temp_directory_path() / "tseg_unit_export";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const ExportPaths paths = export_result(r, mesh, dir / "scan.whatever");
  CHECK(paths.obj == dir / "scan.obj");
  CHECK(paths.probs.empty());
  CHECK(read_labels(paths.labels) == r.face_labels);
  CHECK(read_labels(paths.aux_labels) == r.aux_labels);

  const std::string obj = read_text_file(paths.obj);
  CHECK(obj.find("mtllib scan.mtl") != std::string::npos);
  CHECK(obj.find("usemtl class_00") != std::string::npos);
  CHECK(obj.find("usemtl class_10") != std::string::npos);
  const TriMesh back = load_mesh(paths.obj);
  CHECK(back.face_count() == mesh.face_count());
  const std::string mtl = read_text_file(paths.mtl);
  CHECK(mtl.find("newmtl class_05") != std::string::npos);
  CHECK(mtl.find("Kd 1.000000 0.752941 0.796078") != std::string::npos);

  r.face_probs.assign(mesh.face_count() * kNumClasses, 1.0f / kNumClasses);
  CHECK(fs::exists(export_result(r, mesh, dir / "scan").probs));

  r.face_labels.pop_back();
  CHECK_THROWS_AS(export_result(r, mesh, dir / "bad"), Error);
  fs::remove_all(dir);
}

TEST_CASE("scalar field formats") {
  const std::vector<double> v{0.5, -1.25};
  CHECK(format_field_csv(v).rfind("face,value\n0,", 0) == 0);
  const TriMesh mesh = tseg::testing::flat_grid(2, 2);
  const std::string obj = format_field_obj(mesh, v);
  std::istringstream in(obj);
  std::string line;
  int vertices = 0, faces = 0;
  while (std::getline(in, line)) {
    if (line.rfind("v ", 0) == 0) {
      ++vertices;
      std::istringstream fields(line.substr(2));
      double x, y, z, r, g, b;
      CHECK(static_cast<bool>(fields >> x >> y >> z >> r >> g >> b));
      CHECK((r >= 0 && r <= 1 && g >= 0 && g <= 1 && b >= 0 && b <= 1));
    }
    faces += line.rfind("f ", 0) == 0;
  }
  CHECK(vertices == 4);
  CHECK(faces == 2);
  CHECK_THROWS_AS(format_field_obj(mesh, std::vector<double>{1.0}), Error);
}
