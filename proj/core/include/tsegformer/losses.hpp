// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "tsegformer/layers.hpp"

namespace tseg {

/// Which per-point signal ranks points into the hard set.
/// `none` ranks every point equally, so the first ceil(rN) rows are chosen.
enum class RankingSignal { point, gaussian, mean, none };

const char* to_string(RankingSignal signal);
RankingSignal parse_ranking_signal(const std::string& name);

struct LossWeights {
  double omega_geo = 0.001;
  double omega_aux = 1.0;
  double gamma = 2.0;  // focal modulating exponent
  double r = 0.4;      // hard-point ratio in (0, 1]
  RankingSignal ranking = RankingSignal::point;

  void validate() const;
};

/// Indices of the ceil(r N) largest ranking values, ties broken by ascending
/// index. `values` holds the ranking value of each selected index.
struct HardPointSet {
  std::vector<std::size_t> indices;
  std::vector<double> values;
};

inline constexpr double kProbabilityFloor = 1e-12;

HardPointSet select_hard_points(std::span<const double> ranking, double r);

/// Labels of the auxiliary head: 1 for tooth, 0 for gingiva (class 0).
std::vector<int> tooth_gingiva_labels(std::span<const int> labels);

/// Focal cross-entropy summed over the hard set:
///   -sum_{i in S} (1 - p_i)^gamma * ln(max(p_i, 1e-12)), p_i = probs(i, y_i).
double geo_loss(const nn::Mat<double>& probs, std::span<const int> labels, const HardPointSet& hard, double gamma);

/// Mean negative log-likelihood over all rows.
double seg_loss(const nn::Mat<double>& probs, std::span<const int> labels);
double aux_loss(const nn::Mat<double>& probs, std::span<const int> binary_labels);

struct LossReport {
  double seg = 0.0;
  double geo = 0.0;
  double aux = 0.0;
  double total = 0.0;

  bool operator==(const LossReport&) const = default;
};

LossReport total_loss(double seg, double geo, double aux, const LossWeights& weights);

/// Loss values plus the gradient of the weighted total with respect to both
/// logit matrices.
struct LossEvaluation {
  LossReport report;
  nn::Mat<double> d_seg_logits;
  nn::Mat<double> d_aux_logits;
};

LossEvaluation evaluate_losses(const nn::Mat<double>& seg_logits, const nn::Mat<double>& aux_logits,
                               std::span<const int> labels, const HardPointSet& hard, const LossWeights& weights);

}  // namespace tseg
