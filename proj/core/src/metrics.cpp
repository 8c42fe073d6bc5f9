// SPDX-License-Identifier: Apache-2.0
#include "tsegformer/metrics.hpp"

#include <cstdio>

#include "json.hpp"
#include "tsegformer/error.hpp"

namespace tseg {

MetricSummary evaluate(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) {
    throw Error(ErrorCode::invalid_argument, "prediction has " + std::to_string(pred.size()) +
                                                 " labels but truth has " + std::to_string(truth.size()));
  }
  if (pred.empty()) throw Error(ErrorCode::invalid_argument, "cannot evaluate empty label maps");
  std::array<std::size_t, kNumClasses> inter{}, pred_count{}, truth_count{};
  std::size_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const int p = pred[i];
    const int t = truth[i];
    if (p < 0 || p >= kNumClasses || t < 0 || t >= kNumClasses) {
      throw Error(ErrorCode::invalid_argument, "label out of range at index " + std::to_string(i));
    }
    ++pred_count[p];
    ++truth_count[t];
    if (p == t) {
      ++inter[p];
      ++correct;
    }
  }
  MetricSummary out;
  out.samples = 1;
  out.accuracy = static_cast<double>(correct) / static_cast<double>(pred.size());
  // Extended precision with a single final rounding, so small rational
  // results (e.g. 7/12) come out correctly rounded.
  long double iou_sum = 0.0L;
  long double dsc_sum = 0.0L;
  int scored = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    const std::size_t total = pred_count[c] + truth_count[c];
    if (total == 0) continue;
    const auto i = static_cast<long double>(inter[c]);
    const long double iou = i / static_cast<long double>(total - inter[c]);
    const long double dsc = 2.0L * i / static_cast<long double>(total);
    out.per_class_iou[c] = static_cast<double>(iou);
    out.per_class_dsc[c] = static_cast<double>(dsc);
    iou_sum += iou;
    dsc_sum += dsc;
    ++scored;
  }
  out.miou = static_cast<double>(iou_sum / scored);
  out.dsc = static_cast<double>(dsc_sum / scored);
  return out;
}

namespace {

MetricSummary mean_of(const std::vector<const MetricSummary*>& group) {
  MetricSummary out;
  std::array<double, kNumClasses> iou_sum{};
  std::array<double, kNumClasses> dsc_sum{};
  std::array<int, kNumClasses> class_n{};
  for (const MetricSummary* r : group) {
    out.accuracy += r->accuracy;
    out.miou += r->miou;
    out.dsc += r->dsc;
    out.samples += r->samples;
    for (int c = 0; c < kNumClasses; ++c) {
      if (r->per_class_iou[c]) {
        iou_sum[c] += *r->per_class_iou[c];
        dsc_sum[c] += r->per_class_dsc[c].value_or(0.0);
        ++class_n[c];
      }
    }
  }
  const double n = static_cast<double>(group.size());
  out.accuracy /= n;
  out.miou /= n;
  out.dsc /= n;
  for (int c = 0; c < kNumClasses; ++c) {
    if (class_n[c] > 0) {
      out.per_class_iou[c] = iou_sum[c] / class_n[c];
      out.per_class_dsc[c] = dsc_sum[c] / class_n[c];
    }
  }
  return out;
}

nlohmann::json summary_json(const MetricSummary& s) {
  auto list = [](const auto& values) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& v : values) a.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
    return a;
  };
  return {{"accuracy", s.accuracy},           {"miou", s.miou},
          {"dsc", s.dsc},                     {"samples", s.samples},
          {"per_class_iou", list(s.per_class_iou)}, {"per_class_dsc", list(s.per_class_dsc)}};
}

}  // namespace

MetricReport aggregate(std::span<const MetricSummary> reports, std::span<const Jaw> jaws) {
  if (reports.empty()) throw Error(ErrorCode::invalid_argument, "aggregate needs at least one report");
  if (reports.size() != jaws.size()) throw Error(ErrorCode::invalid_argument, "one jaw tag is required per report");
  std::vector<const MetricSummary*> all, lower, upper;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    all.push_back(&reports[i]);
    (jaws[i] == Jaw::mandible ? lower : upper).push_back(&reports[i]);
  }
  MetricReport out;
  out.all = mean_of(all);
  if (!lower.empty()) out.mandible = mean_of(lower);
  if (!upper.empty()) out.maxillary = mean_of(upper);
  return out;
}

std::string metrics_to_json(const MetricReport& report, int indent) {
  nlohmann::json j;
  j["all"] = summary_json(report.all);
  j["mandible"] = report.mandible ? summary_json(*report.mandible) : nlohmann::json(nullptr);
  j["maxillary"] = report.maxillary ? summary_json(*report.maxillary) : nlohmann::json(nullptr);
  return j.dump(indent) + "\n";
}

std::string format_metric_table(const MetricReport& report, const std::string& method) {
  auto cell = [](const std::optional<MetricSummary>& s, double MetricSummary::*field) {
    char buf[16];
    if (!s) return std::string("    -");
    std::snprintf(buf, sizeof buf, "%5.3f", (*s).*field);
    return std::string(buf);
  };
  const std::size_t width = std::max<std::size_t>(method.size(), 6);
  std::string out;
  auto pad = [width](const std::string& s) { return s + std::string(width - s.size(), ' '); };
  out += pad("") + " | Mandible          | Maxillary         | All\n";
  out += pad("Method") + " |  mIoU   DSC   Acc |  mIoU   DSC   Acc |  mIoU   DSC   Acc\n";
  out += std::string(width, '-') + "-+-------------------+-------------------+------------------\n";
  const std::optional<MetricSummary> all = report.all;
  out += pad(method);
  for (const auto* group : {&report.mandible, &report.maxillary, &all}) {
    out += " | " + cell(*group, &MetricSummary::miou) + " " + cell(*group, &MetricSummary::dsc) + " " +
           cell(*group, &MetricSummary::accuracy);
  }
  out += "\n";
  return out;
}

}  // namespace tseg
