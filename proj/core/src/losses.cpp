// SPDX-License-Identifier: Apache-2.0
#include "tsegformer/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tsegformer/error.hpp"

namespace tseg {

const char* to_string(RankingSignal signal) {
  switch (signal) {
    case RankingSignal::point: return "point";
    case RankingSignal::gaussian: return "gaussian";
    case RankingSignal::mean: return "mean";
    case RankingSignal::none: return "none";
  }
  return "?";
}

RankingSignal parse_ranking_signal(const std::string& name) {
  if (name == "point") return RankingSignal::point;
  if (name == "gaussian") return RankingSignal::gaussian;
  if (name == "mean") return RankingSignal::mean;
  if (name == "none") return RankingSignal::none;
  throw Error(ErrorCode::invalid_argument, "unknown ranking signal '" + name + "'");
}

void LossWeights::validate() const {
  if (!(r > 0.0 && r <= 1.0)) throw Error(ErrorCode::invalid_argument, "hard-point ratio r must lie in (0, 1]");
  if (!(gamma >= 0.0)) throw Error(ErrorCode::invalid_argument, "gamma must be >= 0");
  if (!(omega_geo >= 0.0 && omega_aux >= 0.0)) throw Error(ErrorCode::invalid_argument, "loss weights must be >= 0");
}

HardPointSet select_hard_points(std::span<const double> ranking, double r) {
  if (ranking.empty()) throw Error(ErrorCode::invalid_argument, "select_hard_points: empty input");
  if (!(r > 0.0 && r <= 1.0)) throw Error(ErrorCode::invalid_argument, "select_hard_points: r must lie in (0, 1]");
  const std::size_t n = ranking.size();
  // ceil(r n) with a guard against r n landing a hair above an integer.
  const double scaled = r * static_cast<double>(n);
  std::size_t count = static_cast<std::size_t>(std::ceil(scaled - 1e-9 * std::max(1.0, scaled)));
  count = std::clamp<std::size_t>(count, 1, n);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto before = [&](std::size_t a, std::size_t b) {
    return ranking[a] != ranking[b] ? ranking[a] > ranking[b] : a < b;
  };
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end(), before);
  HardPointSet set;
  set.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count));
  for (std::size_t i : set.indices) set.values.push_back(ranking[i]);
  return set;
}

std::vector<int> tooth_gingiva_labels(std::span<const int> labels) {
  std::vector<int> out(labels.size());
  std::transform(labels.begin(), labels.end(), out.begin(), [](int l) { return l != 0 ? 1 : 0; });
  return out;
}

namespace {

void check_labels(const nn::Mat<double>& probs, std::span<const int> labels) {
  if (static_cast<std::size_t>(probs.rows()) != labels.size()) {
    throw Error(ErrorCode::invalid_argument, "label count does not match prediction rows");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= probs.cols()) {
      throw Error(ErrorCode::invalid_argument, "label " + std::to_string(labels[i]) + " at row " + std::to_string(i) +
                                                   " is outside [0, " + std::to_string(probs.cols()) + ")");
    }
  }
}

double mean_nll(const nn::Mat<double>& probs, std::span<const int> labels) {
  check_labels(probs, labels);
  if (labels.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    sum -= std::log(std::max(probs(static_cast<Eigen::Index>(i), labels[i]), kProbabilityFloor));
  }
  return sum / static_cast<double>(labels.size());
}

/// Per-point focal term and p * dL/dp (the factor multiplying (delta - p_c)
/// in the logit gradient).
std::pair<double, double> focal_term(double p_raw, double gamma) {
  const double p = std::max(p_raw, kProbabilityFloor);
  const double q = 1.0 - p;
  const double log_p = std::log(p);
  const double mod = gamma == 0.0 ? 1.0 : std::pow(q, gamma);
  const double value = -mod * log_p;
  double scale = -mod;
  if (gamma != 0.0 && q > 0.0) scale += gamma * std::pow(q, gamma - 1.0) * p * log_p;
  return {value, scale};
}

}  // namespace

double geo_loss(const nn::Mat<double>& probs, std::span<const int> labels, const HardPointSet& hard, double gamma) {
  check_labels(probs, labels);
  double sum = 0.0;
  for (std::size_t i : hard.indices) {
    if (i >= labels.size()) throw Error(ErrorCode::invalid_argument, "hard-point index out of range");
    sum += focal_term(probs(static_cast<Eigen::Index>(i), labels[i]), gamma).first;
  }
  return sum;
}

double seg_loss(const nn::Mat<double>& probs, std::span<const int> labels) { return mean_nll(probs, labels); }

double aux_loss(const nn::Mat<double>& probs, std::span<const int> binary_labels) {
  return mean_nll(probs, binary_labels);
}

LossReport total_loss(double seg, double geo, double aux, const LossWeights& w) {
  LossReport r;
  r.seg = seg;
  r.geo = geo;
  r.aux = aux;
  r.total = seg + w.omega_geo * geo + w.omega_aux * aux;
  return r;
}

LossEvaluation evaluate_losses(const nn::Mat<double>& seg_logits, const nn::Mat<double>& aux_logits,
                               std::span<const int> labels, const HardPointSet& hard, const LossWeights& weights) {
  weights.validate();
  const nn::Mat<double> p_seg = nn::softmax_rows<double>(seg_logits);
  const nn::Mat<double> p_aux = nn::softmax_rows<double>(aux_logits);
  const std::vector<int> binary = tooth_gingiva_labels(labels);
  const double n = static_cast<double>(labels.size());

  LossEvaluation ev;
  ev.report = total_loss(seg_loss(p_seg, labels), geo_loss(p_seg, labels, hard, weights.gamma),
                         aux_loss(p_aux, binary), weights);

  ev.d_seg_logits = p_seg / n;
  ev.d_aux_logits = p_aux * (weights.omega_aux / n);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    ev.d_seg_logits(r, labels[i]) -= 1.0 / n;
    ev.d_aux_logits(r, binary[i]) -= weights.omega_aux / n;
  }
  if (weights.omega_geo != 0.0) {
    for (std::size_t i : hard.indices) {
      const auto r = static_cast<Eigen::Index>(i);
      const double scale = focal_term(p_seg(r, labels[i]), weights.gamma).second * weights.omega_geo;
      // d/dz_c = scale * (delta_{c,y} - p_c)
      ev.d_seg_logits.row(r) -= scale * p_seg.row(r);
      ev.d_seg_logits(r, labels[i]) += scale;
    }
  }
  return ev;
}

}  // namespace tseg
