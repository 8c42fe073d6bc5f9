// SPDX-License-Identifier: Apache-2.0
#include <numeric>

#include <Eigen/Geometry>
#include <spdlog/spdlog.h>

#include "tsegformer/error.hpp"
#include "tsegformer/mesh.hpp"

namespace tseg {

double TriMesh::total_area() const {
  return std::accumulate(face_area.begin(), face_area.end(), 0.0);
}

namespace {

struct FaceGeometry {
  Vec3 centroid;
  Vec3 normal;
  double area;
};

FaceGeometry face_geometry(const std::vector<Vec3>& v, const Face& f) {
  const Vec3& a = v[f[0]];
  const Vec3& b = v[f[1]];
  const Vec3& c = v[f[2]];
  FaceGeometry g;
  g.centroid = (a + b + c) / 3.0;
  const Vec3 cross = (b - a).cross(c - a);
  const double norm = cross.norm();
  g.area = 0.5 * norm;
  g.normal = norm > 0.0 ? Vec3(cross / norm) : Vec3::Zero();
  return g;
}

}  // namespace

TriMesh make_mesh(std::vector<Vec3> vertices, std::vector<Face> faces, MeshBuildReport* report) {
  const auto nv = static_cast<std::int64_t>(vertices.size());
  for (std::size_t i = 0; i < faces.size(); ++i) {
    for (std::int32_t idx : faces[i]) {
      if (idx < 0 || idx >= nv) {
        throw Error(ErrorCode::validation,
                    "face " + std::to_string(i) + " references vertex " + std::to_string(idx) +
                        " but the mesh has " + std::to_string(nv) + " vertices");
      }
    }
    for (int k = 0; k < 3; ++k) {
      if (!vertices[faces[i][k]].allFinite()) {
        throw Error(ErrorCode::validation, "face " + std::to_string(i) + " uses a non-finite vertex");
      }
    }
  }

  TriMesh mesh;
  mesh.vertices = std::move(vertices);
  mesh.faces.reserve(faces.size());
  std::vector<std::size_t> dropped;
  for (std::size_t i = 0; i < faces.size(); ++i) {
    const FaceGeometry g = face_geometry(mesh.vertices, faces[i]);
    if (!(g.area >= kDegenerateArea)) {
      dropped.push_back(i);
      continue;
    }
    mesh.faces.push_back(faces[i]);
    mesh.face_centroid.push_back(g.centroid);
    mesh.face_normal.push_back(g.normal);
    mesh.face_area.push_back(g.area);
    mesh.source_face.push_back(i);
  }
  if (!dropped.empty()) {
    spdlog::warn("dropped {} degenerate face(s) (area < {:g} mm^2), first is face {}",
                 dropped.size(), kDegenerateArea, dropped.front());
  }
  if (report) report->dropped_faces = std::move(dropped);
  return mesh;
}

void refresh_face_geometry(TriMesh& mesh) {
  for (std::size_t i = 0; i < mesh.faces.size(); ++i) {
    const FaceGeometry g = face_geometry(mesh.vertices, mesh.faces[i]);
    if (!(g.area >= kDegenerateArea)) {
      throw Error(ErrorCode::validation, "face " + std::to_string(i) + " became degenerate");
    }
    mesh.face_centroid[i] = g.centroid;
    mesh.face_normal[i] = g.normal;
    mesh.face_area[i] = g.area;
  }
}

}  // namespace tseg
