// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "tsegformer/geometry.hpp"
#include "tsegformer/mesh.hpp"
#include "tsegformer/network.hpp"

namespace tseg {

/// Partition of Ñ rows into sub-clouds of exactly `chunk` rows. Rows are
/// visited in a seeded random order; the final chunk is topped up with rows
/// already covered by earlier chunks (or, for a single chunk, resampled from
/// itself).
struct ChunkPlan {
  std::vector<std::vector<std::size_t>> chunks;
  std::size_t padded = 0;

  std::size_t rounds() const { return chunks.size(); }
};

ChunkPlan plan_chunks(std::size_t total, std::size_t chunk, std::uint64_t seed);

struct InferenceOptions {
  std::size_t points = 10000;  // N, rows per forward pass
  std::uint64_t seed = 0;
  bool keep_probs = false;
  int threads = 1;  // rounds run concurrently when > 1; the merge order is fixed
};

struct SegmentationResult {
  std::vector<int> face_labels;
  std::vector<int> aux_labels;  // 1 tooth, 0 gingiva; argmax of the auxiliary head
  /// Row-major [faces, n_classes] softmax of the averaged logits; empty unless requested.
  std::vector<float> face_probs;
  std::size_t rounds = 0;
  std::size_t padded = 0;
  std::uint64_t seed = 0;
  std::string checkpoint_id;

  bool operator==(const SegmentationResult&) const = default;
};

/// Predicts every row of a full-resolution cloud. Throws
/// Error(invalid_argument) when the cloud has fewer than k_nn + 1 rows.
SegmentationResult infer_cloud(const NetworkParams<float>& params, const FeatureCloud& cloud,
                               const InferenceOptions& options);

/// Builds full-resolution features once, then runs infer_cloud().
SegmentationResult infer_full_mesh(const NetworkParams<float>& params, const TriMesh& mesh, Jaw jaw,
                                   const InferenceOptions& options);

}  // namespace tseg
