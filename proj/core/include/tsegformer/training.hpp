// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsegformer/checkpoint.hpp"
#include "tsegformer/dataset.hpp"
#include "tsegformer/geometry.hpp"
#include "tsegformer/losses.hpp"
#include "tsegformer/metrics.hpp"
#include "tsegformer/network.hpp"

namespace tseg {

struct AugmentConfig {
  double rotation_deg = 30.0;  // uniform in [-x, x] about the vertical axis
  double translation = 0.05;   // per axis, normalized units
  double jitter = 0.005;       // Gaussian sigma on coordinates
};

/// Rigid rotation about z plus translation and jitter of the coordinate
/// columns. Normals are rotated; curvature columns are left as they are.
FeatureCloud augment(const FeatureCloud& cloud, const AugmentConfig& config, std::uint64_t seed);

/// Training configuration. Text form is one `key = value` per line with `#`
/// comments; see TrainConfig::keys() for the accepted keys.
struct TrainConfig {
  int epochs = 100;
  int batch_size = 2;
  double learning_rate = 1e-3;
  double min_learning_rate = 1e-5;  // end of the cosine schedule
  std::uint64_t seed = 0;
  LossWeights loss;
  bool augment = true;
  AugmentConfig augmentation;
  int points = 10000;           // N, rows sampled per training cloud
  int checkpoint_every = 0;     // epochs between checkpoints; 0 writes only the last one
  int threads = 1;              // batch items processed concurrently
  std::filesystem::path train_data;
  std::filesystem::path val_data;  // optional; training data is used when empty
  std::filesystem::path out_dir;
  NetworkConfig network;

  /// Throws Error(invalid_argument) for out-of-range values and Error(io) for
  /// missing paths when `check_paths` is set.
  void validate(bool check_paths = false) const;

  static TrainConfig parse(const std::string& text, const std::string& origin = "<config>");
  /// Applies `key = value` pairs on top of this config.
  void apply(const std::string& text, const std::string& origin = "<config>");
  std::string to_text() const;
  static const std::vector<std::string>& keys();
};

/// One optimizer step as written to the JSON-lines log.
struct StepRecord {
  std::int64_t step = 0;  // 1-based
  int epoch = 0;          // 1-based
  LossReport loss;        // mean over the batch
  double lr = 0.0;

  std::string to_json() const;
  bool operator==(const StepRecord&) const = default;
};

double cosine_learning_rate(const TrainConfig& config, std::int64_t step, std::int64_t total_steps);

/// A training cloud with its labels and hard-point set.
struct TrainItem {
  FeatureCloud cloud;
  std::vector<int> labels;
  HardPointSet hard;
};

/// Downsamples (and optionally augments) a sample for one epoch.
TrainItem prepare_item(const Sample& sample, const TrainConfig& config, std::uint64_t seed);

/// Loss and parameter gradient of one item.
struct ItemGradient {
  LossReport loss;
  ParamSet<float> grads;
};

ItemGradient item_gradient(const NetworkParams<float>& params, const TrainItem& item, const LossWeights& weights,
                           bool training, std::uint64_t dropout_seed);

/// Adam with bias correction.
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  Adam() = default;
  explicit Adam(const ParamSet<float>& like) : m_(like.zeros_like()), v_(like.zeros_like()) {}

  void step(ParamSet<float>& params, const ParamSet<float>& grads, double lr);

  std::int64_t t() const { return t_; }
  const ParamSet<float>& first_moment() const { return m_; }
  const ParamSet<float>& second_moment() const { return v_; }
  void restore(ParamSet<float> m, ParamSet<float> v, std::int64_t t);

 private:
  ParamSet<float> m_;
  ParamSet<float> v_;
  std::int64_t t_ = 0;
};

/// Stateful trainer over in-memory samples. Deterministic for a fixed config:
/// per-item randomness is derived from (seed, epoch, sample) and dropout from
/// (seed, step, slot); batch gradients are summed in slot order.
class Trainer {
 public:
  Trainer(TrainConfig config, std::span<const Sample> samples);

  const TrainConfig& config() const { return config_; }
  const NetworkParams<float>& params() const { return params_; }
  NetworkParams<float>& params() { return params_; }
  int epoch() const { return epoch_; }
  std::int64_t step_count() const { return step_; }
  std::int64_t total_steps() const;
  bool finished() const { return epoch_ >= config_.epochs; }

  /// Runs the next epoch. `on_step` sees every record as it is produced.
  /// Throws Error(numerical) before updating parameters if a loss or gradient
  /// is non-finite.
  std::vector<StepRecord> run_epoch(const std::function<void(const StepRecord&)>& on_step = {});

  /// One optimizer step on explicit items (no schedule bookkeeping beyond the
  /// step counter).
  StepRecord step_on(std::span<const TrainItem> items, double lr);

  Checkpoint checkpoint() const;
  /// Restores parameters, optimizer state and progress. Throws
  /// Error(validation) if the checkpoint's network config differs.
  void resume(const Checkpoint& checkpoint);

 private:
  TrainConfig config_;
  std::span<const Sample> samples_;
  NetworkParams<float> params_;
  Adam adam_;
  int epoch_ = 0;
  std::int64_t step_ = 0;
};

/// Fraction of correctly labeled rows on each sample's training-size cloud,
/// network in evaluation mode, pooled over all samples.
double point_accuracy(const NetworkParams<float>& params, std::span<const Sample> samples, std::size_t points,
                      std::uint64_t seed);

/// Full-resolution inference plus metrics over a sample set.
MetricReport evaluate_samples(const NetworkParams<float>& params, std::span<const Sample> samples,
                              std::size_t points, std::uint64_t seed);

struct TrainOutcome {
  std::vector<StepRecord> log;
  NetworkParams<float> params;
  MetricReport validation;
  std::optional<std::filesystem::path> checkpoint;
};

/// In-memory training. When `config.out_dir` is set, checkpoints
/// (`checkpoint.tsck`, plus `checkpoint_eNNNN.tsck` at the configured
/// cadence), `train_log.jsonl` and `metrics.json` are written there. When
/// `resume_from` is given, training continues from that checkpoint.
TrainOutcome train(const TrainConfig& config, std::span<const Sample> train_samples,
                   std::span<const Sample> val_samples, const std::optional<Checkpoint>& resume_from = std::nullopt,
                   const std::function<void(const StepRecord&)>& on_step = {});

/// Loads `train_data` (and `val_data`) and runs train().
TrainOutcome train(const TrainConfig& config, const std::optional<std::filesystem::path>& resume_from = std::nullopt,
                   const std::function<void(const StepRecord&)>& on_step = {});

struct RankingComparison {
  RankingSignal signal;
  MetricSummary validation;
};

/// Three runs that differ only in the hard-point ranking signal (gaussian,
/// mean, point), each evaluated on the validation samples.
std::vector<RankingComparison> compare_ranking_signals(const TrainConfig& config, std::span<const Sample> train_samples,
                                                       std::span<const Sample> val_samples);

std::string format_ranking_table(std::span<const RankingComparison> rows);

}  // namespace tseg
