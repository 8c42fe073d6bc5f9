// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "tsegformer/error.hpp"
#include "tsegformer/geometry.hpp"

namespace tseg {

const char* to_string(CurvatureKind kind) {
  switch (kind) {
    case CurvatureKind::gaussian: return "gaussian";
    case CurvatureKind::mean: return "mean";
    case CurvatureKind::point: return "point";
  }
  return "?";
}

CurvatureKind parse_curvature_kind(const std::string& name) {
  if (name == "gaussian") return CurvatureKind::gaussian;
  if (name == "mean") return CurvatureKind::mean;
  if (name == "point") return CurvatureKind::point;
  throw Error(ErrorCode::invalid_argument, "unknown curvature kind '" + name + "'");
}

CurvatureField point_curvature(const TriMesh& mesh, const FaceAdjacency& adj) {
  CurvatureField field;
  field.kind = CurvatureKind::point;
  field.values.assign(mesh.face_count(), 0.0);
  for (std::size_t i = 0; i < mesh.face_count(); ++i) {
    const auto nbrs = adj.second_order[i];
    if (nbrs.empty()) continue;
    double sum = 0.0;
    for (std::uint32_t j : nbrs) {
      // atan2 keeps full precision for nearly parallel normals, where acos does not.
      const Vec3& a = mesh.face_normal[i];
      const Vec3& b = mesh.face_normal[j];
      sum += std::atan2(a.cross(b).norm(), a.dot(b));
    }
    field.values[i] = sum / static_cast<double>(nbrs.size());
  }
  return field;
}

namespace {

/// Interior angle at corner k of face f.
double corner_angle(const TriMesh& mesh, const Face& f, int k) {
  const Vec3& p = mesh.vertices[f[k]];
  const Vec3 a = mesh.vertices[f[(k + 1) % 3]] - p;
  const Vec3 b = mesh.vertices[f[(k + 2) % 3]] - p;
  return std::atan2(a.cross(b).norm(), a.dot(b));
}

std::vector<double> barycentric_area(const TriMesh& mesh) {
  std::vector<double> area(mesh.vertex_count(), 0.0);
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    for (std::int32_t v : mesh.faces[f]) area[v] += mesh.face_area[f] / 3.0;
  }
  return area;
}

std::vector<double> vertex_to_face(const TriMesh& mesh, const std::vector<double>& per_vertex) {
  std::vector<double> out(mesh.face_count());
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    const Face& t = mesh.faces[f];
    out[f] = (per_vertex[t[0]] + per_vertex[t[1]] + per_vertex[t[2]]) / 3.0;
  }
  return out;
}

}  // namespace

std::vector<double> vertex_angle_deficit(const TriMesh& mesh) {
  const std::vector<bool> boundary = boundary_vertices(mesh);
  std::vector<double> deficit(mesh.vertex_count());
  for (std::size_t v = 0; v < deficit.size(); ++v) {
    deficit[v] = boundary[v] ? std::numbers::pi : 2.0 * std::numbers::pi;
  }
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) deficit[f[k]] -= corner_angle(mesh, f, k);
  }
  // Isolated vertices carry no curvature.
  std::vector<bool> used(mesh.vertex_count(), false);
  for (const Face& f : mesh.faces) {
    for (std::int32_t v : f) used[v] = true;
  }
  for (std::size_t v = 0; v < deficit.size(); ++v) {
    if (!used[v]) deficit[v] = 0.0;
  }
  return deficit;
}

CurvatureField gaussian_curvature(const TriMesh& mesh) {
  const std::vector<double> deficit = vertex_angle_deficit(mesh);
  const std::vector<double> area = barycentric_area(mesh);
  const std::vector<bool> boundary = boundary_vertices(mesh);
  std::vector<double> k(mesh.vertex_count(), 0.0);
  for (std::size_t v = 0; v < k.size(); ++v) {
    if (area[v] > 0.0) k[v] = deficit[v] / area[v];
  }
  CurvatureField field;
  field.kind = CurvatureKind::gaussian;
  field.values = vertex_to_face(mesh, k);
  field.boundary_vertex_count = static_cast<std::size_t>(std::count(boundary.begin(), boundary.end(), true));
  return field;
}

CurvatureField mean_curvature(const TriMesh& mesh) {
  constexpr double kMinWeight = 1e-6;
  constexpr double kMaxWeight = 1e6;

  // Half-cotangent contributions per directed edge, reduced per undirected edge.
  struct EdgeCot {
    std::uint64_t key;
    double cot;
  };
  std::vector<EdgeCot> contributions;
  contributions.reserve(mesh.face_count() * 3);
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const Vec3& p = mesh.vertices[f[k]];
      const Vec3 a = mesh.vertices[f[(k + 1) % 3]] - p;
      const Vec3 b = mesh.vertices[f[(k + 2) % 3]] - p;
      const double cross = a.cross(b).norm();
      const double cot = cross > 0.0 ? a.dot(b) / cross : kMaxWeight;
      const auto lo = static_cast<std::uint64_t>(std::min(f[(k + 1) % 3], f[(k + 2) % 3]));
      const auto hi = static_cast<std::uint64_t>(std::max(f[(k + 1) % 3], f[(k + 2) % 3]));
      contributions.push_back({(lo << 32) | hi, cot});
    }
  }
  std::sort(contributions.begin(), contributions.end(),
            [](const EdgeCot& a, const EdgeCot& b) { return a.key < b.key; });

  std::vector<Vec3> laplacian(mesh.vertex_count(), Vec3::Zero());
  for (std::size_t i = 0; i < contributions.size();) {
    std::size_t j = i;
    double sum = 0.0;
    while (j < contributions.size() && contributions[j].key == contributions[i].key) sum += contributions[j++].cot;
    const double w = std::clamp(0.5 * sum, kMinWeight, kMaxWeight);
    const auto a = static_cast<std::size_t>(contributions[i].key >> 32);
    const auto b = static_cast<std::size_t>(contributions[i].key & 0xffffffffULL);
    const Vec3 d = mesh.vertices[b] - mesh.vertices[a];
    laplacian[a] += w * d;
    laplacian[b] -= w * d;
    i = j;
  }

  const std::vector<double> area = barycentric_area(mesh);
  const std::vector<bool> boundary = boundary_vertices(mesh);
  std::vector<Vec3> vertex_normal(mesh.vertex_count(), Vec3::Zero());
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    for (std::int32_t v : mesh.faces[f]) vertex_normal[v] += mesh.face_area[f] * mesh.face_normal[f];
  }

  std::vector<double> h(mesh.vertex_count(), 0.0);
  std::size_t boundary_count = 0;
  for (std::size_t v = 0; v < h.size(); ++v) {
    if (area[v] <= 0.0) continue;
    const Vec3 lb = laplacian[v] / area[v];
    if (boundary[v]) {
      ++boundary_count;
      const double n = vertex_normal[v].norm();
      h[v] = n > 0.0 ? 0.5 * std::abs(lb.dot(vertex_normal[v] / n)) : 0.0;
    } else {
      h[v] = 0.5 * lb.norm();
    }
  }
  CurvatureField field;
  field.kind = CurvatureKind::mean;
  field.values = vertex_to_face(mesh, h);
  field.boundary_vertex_count = boundary_count;
  return field;
}

}  // namespace tseg
