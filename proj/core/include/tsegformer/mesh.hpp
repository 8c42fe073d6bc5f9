// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace tseg {

using Vec3 = Eigen::Vector3d;
using Face = std::array<std::int32_t, 3>;

/// Faces with area below this (mm^2) are dropped during validation.
inline constexpr double kDegenerateArea = 1e-10;

/// Indexed triangle mesh with per-face derived quantities.
///
/// Instances are produced by make_mesh() (or the loaders), which validate the
/// index range and drop degenerate faces; every stored face therefore has a
/// well-defined unit normal. `source_face[k]` is the index the k-th face had
/// before degenerate faces were removed.
struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<Vec3> face_centroid;
  std::vector<Vec3> face_normal;
  std::vector<double> face_area;
  std::vector<std::size_t> source_face;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t face_count() const { return faces.size(); }
  double total_area() const;
};

struct MeshBuildReport {
  std::vector<std::size_t> dropped_faces;
};

/// Validates and indexes a raw triangle soup. Throws Error(validation) naming
/// the first face whose index is out of range.
TriMesh make_mesh(std::vector<Vec3> vertices, std::vector<Face> faces,
                  MeshBuildReport* report = nullptr);

/// Recomputes centroids, normals and areas after vertices were moved.
/// Throws if a face became degenerate.
void refresh_face_geometry(TriMesh& mesh);

enum class MeshFormat { obj, ply, stl };

MeshFormat mesh_format_from_path(const std::filesystem::path& path);

TriMesh load_mesh(const std::filesystem::path& path, MeshFormat format);
TriMesh load_mesh(const std::filesystem::path& path);

/// Parses mesh text already in memory. `origin` is used in error messages.
TriMesh parse_mesh(const std::string& text, MeshFormat format, const std::string& origin = "<memory>");

/// OBJ text with 6-decimal coordinates and 1-based `f` records.
std::string format_obj(const TriMesh& mesh);
void save_mesh(const TriMesh& mesh, const std::filesystem::path& path);

/// Compressed-row neighbor lists: neighbors of face i are
/// indices[offsets[i] .. offsets[i+1]), sorted ascending.
struct NeighborLists {
  std::vector<std::size_t> offsets{0};
  std::vector<std::uint32_t> indices;

  std::size_t size() const { return offsets.size() - 1; }
  std::span<const std::uint32_t> operator[](std::size_t i) const {
    return {indices.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }
  void push_row(std::span<const std::uint32_t> row) {
    indices.insert(indices.end(), row.begin(), row.end());
    offsets.push_back(indices.size());
  }
};

/// Shared-edge face adjacency. Non-manifold edges make every incident face a
/// mutual neighbor. `second_order` holds faces within two hops, excluding the
/// face itself.
struct FaceAdjacency {
  NeighborLists first_order;
  NeighborLists second_order;
};

FaceAdjacency build_adjacency(const TriMesh& mesh);

/// Alternative neighborhood: the k nearest face centroids (excluding the face).
/// Stored in `second_order`; `first_order` is the shared-edge adjacency.
FaceAdjacency build_knn_neighborhood(const TriMesh& mesh, std::size_t k);

/// Indices of boundary vertices (vertices on an edge with exactly one face).
std::vector<bool> boundary_vertices(const TriMesh& mesh);

}  // namespace tseg
