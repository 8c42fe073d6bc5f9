// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <queue>

#include "tsegformer/error.hpp"
#include "tsegformer/mesh.hpp"

namespace tseg {
namespace {

struct EdgeRecord {
  std::uint64_t key;
  std::uint32_t face;
  bool operator<(const EdgeRecord& o) const { return key != o.key ? key < o.key : face < o.face; }
};

std::uint64_t edge_key(std::int32_t a, std::int32_t b) {
  const auto lo = static_cast<std::uint64_t>(std::min(a, b));
  const auto hi = static_cast<std::uint64_t>(std::max(a, b));
  return (lo << 32) | hi;
}

std::vector<EdgeRecord> sorted_edges(const TriMesh& mesh) {
  std::vector<EdgeRecord> edges;
  edges.reserve(mesh.faces.size() * 3);
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    const Face& t = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      edges.push_back({edge_key(t[k], t[(k + 1) % 3]), static_cast<std::uint32_t>(f)});
    }
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

NeighborLists edge_neighbors(const TriMesh& mesh) {
  const std::vector<EdgeRecord> edges = sorted_edges(mesh);
  std::vector<std::vector<std::uint32_t>> rows(mesh.faces.size());
  for (std::size_t i = 0; i < edges.size();) {
    std::size_t j = i;
    while (j < edges.size() && edges[j].key == edges[i].key) ++j;
    for (std::size_t a = i; a < j; ++a) {
      for (std::size_t b = i; b < j; ++b) {
        if (edges[a].face != edges[b].face) rows[edges[a].face].push_back(edges[b].face);
      }
    }
    i = j;
  }
  NeighborLists lists;
  lists.indices.reserve(mesh.faces.size() * 3);
  for (auto& row : rows) {
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    lists.push_row(row);
  }
  return lists;
}

NeighborLists two_hop(const NeighborLists& first) {
  NeighborLists second;
  std::vector<std::uint32_t> row;
  for (std::size_t i = 0; i < first.size(); ++i) {
    row.clear();
    for (std::uint32_t j : first[i]) {
      row.push_back(j);
      for (std::uint32_t k : first[j]) {
        if (k != i) row.push_back(k);
      }
    }
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    second.push_row(row);
  }
  return second;
}

/// Minimal static kd-tree over 3D points for k-nearest queries.
class KdTree {
 public:
  explicit KdTree(const std::vector<Vec3>& points) : points_(points), order_(points.size()) {
    for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<std::uint32_t>(i);
    build(0, order_.size(), 0);
  }

  /// Up to k nearest indices to `query`, excluding `skip`, ordered by
  /// (distance, index).
  std::vector<std::uint32_t> nearest(const Vec3& query, std::size_t k, std::uint32_t skip) const {
    std::priority_queue<std::pair<double, std::uint32_t>> heap;
    search(0, order_.size(), 0, query, k, skip, heap);
    std::vector<std::pair<double, std::uint32_t>> found;
    while (!heap.empty()) {
      found.push_back(heap.top());
      heap.pop();
    }
    std::sort(found.begin(), found.end());
    std::vector<std::uint32_t> out;
    for (auto& f : found) out.push_back(f.second);
    return out;
  }

 private:
  void build(std::size_t lo, std::size_t hi, int axis) {
    if (hi - lo <= 1) return;
    const std::size_t mid = (lo + hi) / 2;
    std::nth_element(order_.begin() + lo, order_.begin() + mid, order_.begin() + hi,
                     [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
    build(lo, mid, (axis + 1) % 3);
    build(mid + 1, hi, (axis + 1) % 3);
  }

  void search(std::size_t lo, std::size_t hi, int axis, const Vec3& q, std::size_t k, std::uint32_t skip,
              std::priority_queue<std::pair<double, std::uint32_t>>& heap) const {
    if (lo >= hi) return;
    const std::size_t mid = (lo + hi) / 2;
    const std::uint32_t idx = order_[mid];
    if (idx != skip) {
      const double d = (points_[idx] - q).squaredNorm();
      std::pair<double, std::uint32_t> cand{d, idx};
      if (heap.size() < k) {
        heap.push(cand);
      } else if (cand < heap.top()) {
        heap.pop();
        heap.push(cand);
      }
    }
    const double delta = q[axis] - points_[idx][axis];
    const int next = (axis + 1) % 3;
    const bool left_first = delta < 0.0;
    if (left_first) {
      search(lo, mid, next, q, k, skip, heap);
    } else {
      search(mid + 1, hi, next, q, k, skip, heap);
    }
    if (heap.size() < k || delta * delta <= heap.top().first) {
      if (left_first) {
        search(mid + 1, hi, next, q, k, skip, heap);
      } else {
        search(lo, mid, next, q, k, skip, heap);
      }
    }
  }

  const std::vector<Vec3>& points_;
  std::vector<std::uint32_t> order_;
};

}  // namespace

FaceAdjacency build_adjacency(const TriMesh& mesh) {
  FaceAdjacency adj;
  adj.first_order = edge_neighbors(mesh);
  adj.second_order = two_hop(adj.first_order);
  return adj;
}

FaceAdjacency build_knn_neighborhood(const TriMesh& mesh, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::invalid_argument, "k-NN neighborhood needs k >= 1");
  FaceAdjacency adj;
  adj.first_order = edge_neighbors(mesh);
  const KdTree tree(mesh.face_centroid);
  for (std::size_t i = 0; i < mesh.face_count(); ++i) {
    std::vector<std::uint32_t> row = tree.nearest(mesh.face_centroid[i], k, static_cast<std::uint32_t>(i));
    std::sort(row.begin(), row.end());
    adj.second_order.push_row(row);
  }
  return adj;
}

std::vector<bool> boundary_vertices(const TriMesh& mesh) {
  const std::vector<EdgeRecord> edges = sorted_edges(mesh);
  std::vector<bool> boundary(mesh.vertex_count(), false);
  for (std::size_t i = 0; i < edges.size();) {
    std::size_t j = i;
    while (j < edges.size() && edges[j].key == edges[i].key) ++j;
    if (j - i == 1) {
      boundary[edges[i].key >> 32] = true;
      boundary[edges[i].key & 0xffffffffULL] = true;
    }
    i = j;
  }
  return boundary;
}

}  // namespace tseg
