// SPDX-License-Identifier: Apache-2.0
#include "tsegformer/inference.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "tsegformer/checkpoint.hpp"
#include "tsegformer/error.hpp"
#include "tsegformer/rng.hpp"

namespace tseg {

ChunkPlan plan_chunks(std::size_t total, std::size_t chunk, std::uint64_t seed) {
  if (total == 0 || chunk == 0) throw Error(ErrorCode::invalid_argument, "plan_chunks needs total > 0 and chunk > 0");
  Rng rng(derive_seed(seed, 0x63686e6b));
  const std::vector<std::size_t> order = permutation(total, rng);
  const std::size_t rounds = (total + chunk - 1) / chunk;
  ChunkPlan plan;
  for (std::size_t r = 0; r < rounds; ++r) {
    const std::size_t begin = r * chunk;
    const std::size_t end = std::min(total, begin + chunk);
    plan.chunks.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  std::vector<std::size_t>& last = plan.chunks.back();
  plan.padded = chunk - last.size();
  if (plan.padded > 0) {
    if (rounds > 1) {
      // Draw distinct rows from the chunks already completed.
      const std::size_t covered = (rounds - 1) * chunk;
      std::vector<std::size_t> pick(covered);
      for (std::size_t i = 0; i < covered; ++i) pick[i] = i;
      for (std::size_t i = 0; i < plan.padded; ++i) {
        const std::size_t j = i + rng.index(covered - i);
        std::swap(pick[i], pick[j]);
        last.push_back(order[pick[i]]);
      }
    } else {
      const std::size_t n = last.size();
      for (std::size_t i = 0; i < plan.padded; ++i) last.push_back(last[rng.index(n)]);
    }
  }
  return plan;
}

SegmentationResult infer_cloud(const NetworkParams<float>& params, const FeatureCloud& cloud,
                               const InferenceOptions& options) {
  const NetworkConfig& config = params.config;
  const std::size_t total = cloud.size();
  if (total < static_cast<std::size_t>(config.k_nn) + 1) {
    throw Error(ErrorCode::invalid_argument, "mesh has " + std::to_string(total) + " faces; at least " +
                                                 std::to_string(config.k_nn + 1) + " are required");
  }
  if (options.points < static_cast<std::size_t>(config.k_nn)) {
    throw Error(ErrorCode::invalid_argument, "points per round must be at least k_nn");
  }
  // Rows must be the mesh faces in order so labels map back one to one.
  if (!cloud.source_face.empty()) {
    bool identity = true;
    for (std::size_t p = 0; p < total && identity; ++p) identity = cloud.source_face[p] == p;
    if (!identity) throw Error(ErrorCode::invalid_argument, "infer_cloud expects a full-resolution cloud");
  }
  const ChunkPlan plan = plan_chunks(total, options.points, options.seed);
  const Network<float> net(config);
  const Eigen::Vector2d category = cloud.category();

  std::vector<NetworkOutput<float>> outputs(plan.rounds());
  auto run_round = [&](std::size_t r) {
    const std::vector<std::size_t>& rows = plan.chunks[r];
    nn::Mat<float> x(static_cast<Eigen::Index>(rows.size()), kFeatureDim);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      x.row(static_cast<Eigen::Index>(i)) = cloud.features.row(static_cast<Eigen::Index>(rows[i])).cast<float>();
    }
    outputs[r] = net.forward(params, x, category);
  };
  const std::size_t workers = std::min<std::size_t>(std::max(options.threads, 1), plan.rounds());
  if (workers <= 1) {
    for (std::size_t r = 0; r < plan.rounds(); ++r) run_round(r);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t r = w; r < plan.rounds(); r += workers) run_round(r);
      });
    }
    for (auto& t : pool) t.join();
  }

  // Merge in round order so the reduction is independent of thread timing.
  const int nc = config.n_classes;
  const int na = config.n_aux;
  std::vector<double> seg(total * static_cast<std::size_t>(nc), 0.0);
  std::vector<double> aux(total * static_cast<std::size_t>(na), 0.0);
  std::vector<int> hits(total, 0);
  for (std::size_t r = 0; r < plan.rounds(); ++r) {
    const std::vector<std::size_t>& rows = plan.chunks[r];
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::size_t p = rows[i];
      const auto ii = static_cast<Eigen::Index>(i);
      for (int c = 0; c < nc; ++c) seg[p * nc + c] += outputs[r].seg_logits(ii, c);
      for (int c = 0; c < na; ++c) aux[p * na + c] += outputs[r].aux_logits(ii, c);
      ++hits[p];
    }
  }

  SegmentationResult out;
  out.rounds = plan.rounds();
  out.padded = plan.padded;
  out.seed = options.seed;
  out.checkpoint_id = checkpoint_id(params);
  out.face_labels.assign(total, 0);
  out.aux_labels.assign(total, 0);
  if (options.keep_probs) out.face_probs.assign(total * static_cast<std::size_t>(nc), 0.0f);
  for (std::size_t p = 0; p < total; ++p) {
    if (hits[p] == 0) throw Error(ErrorCode::numerical, "row " + std::to_string(p) + " was not covered");
    const double inv = 1.0 / hits[p];
    const double* s = seg.data() + p * nc;
    const double* a = aux.data() + p * na;
    out.face_labels[p] = static_cast<int>(std::max_element(s, s + nc) - s);
    out.aux_labels[p] = static_cast<int>(std::max_element(a, a + na) - a);
    if (options.keep_probs) {
      const double top = s[out.face_labels[p]] * inv;
      double z = 0.0;
      for (int c = 0; c < nc; ++c) z += std::exp(s[c] * inv - top);
      for (int c = 0; c < nc; ++c) out.face_probs[p * nc + c] = static_cast<float>(std::exp(s[c] * inv - top) / z);
    }
  }
  return out;
}

SegmentationResult infer_full_mesh(const NetworkParams<float>& params, const TriMesh& mesh, Jaw jaw,
                                   const InferenceOptions& options) {
  if (mesh.face_count() < static_cast<std::size_t>(params.config.k_nn) + 1) {
    throw Error(ErrorCode::invalid_argument, "mesh has " + std::to_string(mesh.face_count()) +
                                                 " faces; at least " + std::to_string(params.config.k_nn + 1) +
                                                 " are required");
  }
  const FaceAdjacency adj = build_adjacency(mesh);
  return infer_cloud(params, build_features(mesh, adj, jaw), options);
}

}  // namespace tseg
