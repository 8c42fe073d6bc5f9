// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsegformer/geometry.hpp"
#include "tsegformer/synthetic.hpp"

namespace tseg {

/// Segmentation scores for one sample or the mean over several. Classes absent
/// from both prediction and truth have no IoU (std::nullopt) and are left out
/// of mIoU and DSC.
struct MetricSummary {
  double accuracy = 0.0;
  double miou = 0.0;
  double dsc = 0.0;
  std::array<std::optional<double>, kNumClasses> per_class_iou{};
  std::array<std::optional<double>, kNumClasses> per_class_dsc{};
  std::size_t samples = 0;
};

struct MetricReport {
  MetricSummary all;
  std::optional<MetricSummary> mandible;
  std::optional<MetricSummary> maxillary;
};

/// Throws Error(invalid_argument) on length mismatch, empty input, or labels
/// outside [0, kNumClasses).
MetricSummary evaluate(std::span<const int> pred, std::span<const int> truth);

/// Unweighted mean of per-sample summaries, overall and per jaw. A per-class
/// IoU is averaged over the samples where that class was scored.
MetricReport aggregate(std::span<const MetricSummary> reports, std::span<const Jaw> jaws);

std::string metrics_to_json(const MetricReport& report, int indent = 2);

/// Aligned text table: one row per jaw group, columns mIoU / DSC / Acc as
/// fractions with three decimals.
std::string format_metric_table(const MetricReport& report, const std::string& method = "TSegFormer");

}  // namespace tseg
