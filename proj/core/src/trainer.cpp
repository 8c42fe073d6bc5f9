// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "json.hpp"
#include "tsegformer/error.hpp"
#include "tsegformer/inference.hpp"
#include "tsegformer/io_util.hpp"
#include "tsegformer/rng.hpp"
#include "tsegformer/training.hpp"

namespace tseg {

namespace {

// Stream tags for derive_seed().
constexpr std::uint64_t kInitStream = 0x696e6974;
constexpr std::uint64_t kOrderStream = 0x6f726472;
constexpr std::uint64_t kSampleStream = 0x73616d70;
constexpr std::uint64_t kAugmentStream = 0x61756731;
constexpr std::uint64_t kDropoutStream = 0x64726f70;

std::vector<double> ranking_values(const FeatureCloud& cloud, RankingSignal signal) {
  switch (signal) {
    case RankingSignal::point: return cloud.raw_point;
    case RankingSignal::gaussian: return cloud.raw_gaussian;
    case RankingSignal::mean: return cloud.raw_mean;
    case RankingSignal::none: break;
  }
  return std::vector<double>(cloud.size(), 0.0);
}

void add_into(ParamSet<float>& acc, const ParamSet<float>& g) {
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

}  // namespace

std::string StepRecord::to_json() const {
  nlohmann::json j = {{"step", step},       {"epoch", epoch},     {"L_seg", loss.seg}, {"L_geo", loss.geo},
                      {"L_aux", loss.aux},  {"L_total", loss.total}, {"lr", lr}};
  return j.dump();
}

double cosine_learning_rate(const TrainConfig& config, std::int64_t step, std::int64_t total_steps) {
  if (total_steps <= 1) return config.learning_rate;
  const double progress = static_cast<double>(step) / static_cast<double>(total_steps - 1);
  return config.min_learning_rate +
         0.5 * (config.learning_rate - config.min_learning_rate) * (1.0 + std::cos(std::numbers::pi * progress));
}

TrainItem prepare_item(const Sample& sample, const TrainConfig& config, std::uint64_t seed) {
  TrainItem item;
  item.cloud = downsample(sample.cloud, static_cast<std::size_t>(config.points), derive_seed(seed, kSampleStream));
  if (config.augment) item.cloud = augment(item.cloud, config.augmentation, derive_seed(seed, kAugmentStream));
  item.labels.reserve(item.cloud.size());
  for (std::size_t f : item.cloud.source_face) item.labels.push_back(sample.labels[f]);
  const std::vector<double> rank = ranking_values(item.cloud, config.loss.ranking);
  item.hard = select_hard_points(rank, config.loss.r);
  return item;
}

ItemGradient item_gradient(const NetworkParams<float>& params, const TrainItem& item, const LossWeights& weights,
                           bool training, std::uint64_t dropout_seed) {
  const Network<float> net(params.config);
  ForwardCache<float> cache;
  ForwardOptions<float> options;
  options.training = training;
  options.dropout_seed = dropout_seed;
  const nn::Mat<float> x = item.cloud.features.cast<float>();
  const NetworkOutput<float> out = net.forward(params, x, item.cloud.category(), &cache, options);
  const LossEvaluation eval = evaluate_losses(out.seg_logits.cast<double>(), out.aux_logits.cast<double>(),
                                              item.labels, item.hard, weights);
  ItemGradient g;
  g.loss = eval.report;
  g.grads = net.backward(params, cache, eval.d_seg_logits.cast<float>(), eval.d_aux_logits.cast<float>());
  return g;
}

void Adam::step(ParamSet<float>& params, const ParamSet<float>& grads, double lr) {
  if (m_.size() == 0) {
    m_ = params.zeros_like();
    v_ = params.zeros_like();
  }
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  const float step_size = static_cast<float>(lr / c1);
  const float inv_c2 = static_cast<float>(1.0 / c2);
  const auto b1 = static_cast<float>(kBeta1);
  const auto b2 = static_cast<float>(kBeta2);
  const auto eps = static_cast<float>(kEps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto m = m_[i].array();
    auto v = v_[i].array();
    const auto g = grads[i].array();
    m = b1 * m + (1.0f - b1) * g;
    v = b2 * v + (1.0f - b2) * g.square();
    params[i].array() -= step_size * m / ((v * inv_c2).sqrt() + eps);
  }
}

void Adam::restore(ParamSet<float> m, ParamSet<float> v, std::int64_t t) {
  m_ = std::move(m);
  v_ = std::move(v);
  t_ = t;
}

Trainer::Trainer(TrainConfig config, std::span<const Sample> samples)
    : config_(std::move(config)), samples_(samples) {
  config_.validate();
  if (samples_.empty()) throw Error(ErrorCode::invalid_argument, "training needs at least one sample");
  params_ = init_params<float>(config_.network, derive_seed(config_.seed, kInitStream));
  adam_ = Adam(params_.tensors);
}

std::int64_t Trainer::total_steps() const {
  const auto per_epoch = static_cast<std::int64_t>((samples_.size() + config_.batch_size - 1) / config_.batch_size);
  return per_epoch * config_.epochs;
}

StepRecord Trainer::step_on(std::span<const TrainItem> items, double lr) {
  const std::int64_t step = step_ + 1;
  std::vector<ItemGradient> results(items.size());
  auto run = [&](std::size_t slot) {
    results[slot] = item_gradient(params_, items[slot], config_.loss, true,
                                  derive_seed(config_.seed, kDropoutStream, static_cast<std::uint64_t>(step), slot));
  };
  if (config_.threads > 1 && items.size() > 1) {
    std::vector<std::thread> pool;
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config_.threads), items.size());
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t s = w; s < items.size(); s += workers) run(s);
      });
    }
    for (auto& t : pool) t.join();
  } else {
    for (std::size_t s = 0; s < items.size(); ++s) run(s);
  }

  StepRecord rec;
  rec.step = step;
  rec.epoch = epoch_ + 1;
  rec.lr = lr;
  ParamSet<float> grads = results.front().grads;
  for (std::size_t s = 1; s < results.size(); ++s) add_into(grads, results[s].grads);
  const float inv = 1.0f / static_cast<float>(items.size());
  for (std::size_t i = 0; i < grads.size(); ++i) grads[i] *= inv;
  for (const ItemGradient& r : results) {
    rec.loss.seg += r.loss.seg;
    rec.loss.geo += r.loss.geo;
    rec.loss.aux += r.loss.aux;
    rec.loss.total += r.loss.total;
  }
  const double n = static_cast<double>(items.size());
  rec.loss.seg /= n;
  rec.loss.geo /= n;
  rec.loss.aux /= n;
  rec.loss.total /= n;
  if (!std::isfinite(rec.loss.total) || !grads.all_finite()) {
    throw Error(ErrorCode::numerical, "non-finite loss or gradient at step " + std::to_string(step));
  }
  adam_.step(params_.tensors, grads, lr);
  step_ = step;
  return rec;
}

std::vector<StepRecord> Trainer::run_epoch(const std::function<void(const StepRecord&)>& on_step) {
  if (finished()) return {};
  const int epoch = epoch_ + 1;
  Rng order_rng(derive_seed(config_.seed, kOrderStream, static_cast<std::uint64_t>(epoch)));
  const std::vector<std::size_t> order = permutation(samples_.size(), order_rng);
  const std::int64_t total = total_steps();
  std::vector<StepRecord> records;
  for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(config_.batch_size)) {
    const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(config_.batch_size));
    std::vector<TrainItem> items;
    for (std::size_t k = begin; k < end; ++k) {
      const std::size_t idx = order[k];
      items.push_back(prepare_item(samples_[idx], config_,
                                   derive_seed(config_.seed, static_cast<std::uint64_t>(epoch), idx)));
    }
    const StepRecord rec = step_on(items, cosine_learning_rate(config_, step_, total));
    if (on_step) on_step(rec);
    records.push_back(rec);
  }
  epoch_ = epoch;
  return records;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.params = params_;
  nlohmann::json meta = {{"epoch", epoch_}, {"step", step_}, {"adam_t", adam_.t()}, {"train_seed", config_.seed},
                        {"points", config_.points}};
  c.metadata = meta.dump();
  for (std::size_t i = 0; i < adam_.first_moment().size(); ++i) {
    c.state.add("adam.m/" + adam_.first_moment().name(i), adam_.first_moment()[i]);
    c.state.add("adam.v/" + adam_.second_moment().name(i), adam_.second_moment()[i]);
  }
  return c;
}

void Trainer::resume(const Checkpoint& checkpoint) {
  if (!(checkpoint.params.config == config_.network)) {
    throw Error(ErrorCode::validation, "checkpoint network config does not match the training config");
  }
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(checkpoint.metadata);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("checkpoint metadata: ") + e.what());
  }
  params_ = checkpoint.params;
  ParamSet<float> m = params_.tensors.zeros_like();
  ParamSet<float> v = params_.tensors.zeros_like();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const std::string& name = m.name(i);
    if (checkpoint.state.contains("adam.m/" + name)) m[i] = checkpoint.state.at("adam.m/" + name);
    if (checkpoint.state.contains("adam.v/" + name)) v[i] = checkpoint.state.at("adam.v/" + name);
  }
  adam_.restore(std::move(m), std::move(v), meta.value("adam_t", std::int64_t{0}));
  epoch_ = meta.value("epoch", 0);
  step_ = meta.value("step", std::int64_t{0});
}

double point_accuracy(const NetworkParams<float>& params, std::span<const Sample> samples, std::size_t points,
                      std::uint64_t seed) {
  const Network<float> net(params.config);
  std::size_t correct = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const FeatureCloud cloud = downsample(samples[i].cloud, std::min(points, samples[i].cloud.size()),
                                          derive_seed(seed, kSampleStream, i));
    const NetworkOutput<float> out = net.forward(params, cloud.features.cast<float>(), cloud.category());
    for (std::size_t r = 0; r < cloud.size(); ++r) {
      Eigen::Index arg = 0;
      out.seg_logits.row(static_cast<Eigen::Index>(r)).maxCoeff(&arg);
      correct += static_cast<int>(arg) == samples[i].labels[cloud.source_face[r]];
      ++total;
    }
  }
  return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
}

MetricReport evaluate_samples(const NetworkParams<float>& params, std::span<const Sample> samples,
                              std::size_t points, std::uint64_t seed) {
  std::vector<MetricSummary> reports;
  std::vector<Jaw> jaws;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    InferenceOptions options;
    options.points = points;
    options.seed = derive_seed(seed, i);
    const SegmentationResult r = infer_cloud(params, samples[i].cloud, options);
    reports.push_back(evaluate(r.face_labels, samples[i].labels));
    jaws.push_back(samples[i].jaw);
  }
  return aggregate(reports, jaws);
}

namespace {

std::vector<StepRecord> read_log_prefix(const std::filesystem::path& path, std::int64_t last_step) {
  std::vector<StepRecord> out;
  if (!std::filesystem::exists(path)) return out;
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    StepRecord r;
    r.step = j.value("step", std::int64_t{0});
    if (r.step > last_step) break;
    r.epoch = j.value("epoch", 0);
    r.loss = {j.value("L_seg", 0.0), j.value("L_geo", 0.0), j.value("L_aux", 0.0), j.value("L_total", 0.0)};
    r.lr = j.value("lr", 0.0);
    out.push_back(r);
  }
  return out;
}

std::string format_log(const std::vector<StepRecord>& log) {
  std::string out;
  for (const StepRecord& r : log) out += r.to_json() + "\n";
  return out;
}

}  // namespace

TrainOutcome train(const TrainConfig& config, std::span<const Sample> train_samples,
                   std::span<const Sample> val_samples, const std::optional<Checkpoint>& resume_from,
                   const std::function<void(const StepRecord&)>& on_step) {
  Trainer trainer(config, train_samples);
  TrainOutcome outcome;
  const bool write = !config.out_dir.empty();
  const std::filesystem::path log_path = config.out_dir / "train_log.jsonl";
  if (resume_from) {
    trainer.resume(*resume_from);
    if (write) outcome.log = read_log_prefix(log_path, trainer.step_count());
    spdlog::info("resuming at epoch {} (step {})", trainer.epoch(), trainer.step_count());
  }
  std::ofstream log_stream;
  if (write) {
    std::filesystem::create_directories(config.out_dir);
    atomic_write(log_path, format_log(outcome.log));
    log_stream.open(log_path, std::ios::app);
  }
  auto record = [&](const StepRecord& r) {
    outcome.log.push_back(r);
    if (write) log_stream << r.to_json() << '\n' << std::flush;
    if (on_step) on_step(r);
  };
  auto save = [&](const std::filesystem::path& p) {
    save_checkpoint(p, trainer.checkpoint());
    outcome.checkpoint = p;
  };
  while (!trainer.finished()) {
    const std::vector<StepRecord> records = trainer.run_epoch(record);
    const StepRecord& last = records.back();
    spdlog::debug("epoch {}: L_total {:.5f} (seg {:.5f}, geo {:.5f}, aux {:.5f})", trainer.epoch(), last.loss.total,
                  last.loss.seg, last.loss.geo, last.loss.aux);
    if (write && config.checkpoint_every > 0 && trainer.epoch() % config.checkpoint_every == 0) {
      char name[48];
      std::snprintf(name, sizeof name, "checkpoint_e%04d.tsck", trainer.epoch());
      save(config.out_dir / name);
      save(config.out_dir / "checkpoint.tsck");
    }
  }
  if (write) save(config.out_dir / "checkpoint.tsck");
  outcome.params = trainer.params();
  const std::span<const Sample> eval_set = val_samples.empty() ? train_samples : val_samples;
  outcome.validation = evaluate_samples(outcome.params, eval_set, static_cast<std::size_t>(config.points),
                                        derive_seed(config.seed, 0x76616c));
  if (write) atomic_write(config.out_dir / "metrics.json", metrics_to_json(outcome.validation));
  return outcome;
}

TrainOutcome train(const TrainConfig& config, const std::optional<std::filesystem::path>& resume_from,
                   const std::function<void(const StepRecord&)>& on_step) {
  config.validate(true);
  const std::vector<Sample> train_samples = load_dataset(config.train_data);
  std::vector<Sample> val_samples;
  if (!config.val_data.empty()) val_samples = load_dataset(config.val_data);
  std::optional<Checkpoint> checkpoint;
  if (resume_from) checkpoint = load_checkpoint(*resume_from);
  return train(config, train_samples, val_samples, checkpoint, on_step);
}

std::vector<RankingComparison> compare_ranking_signals(const TrainConfig& config, std::span<const Sample> train_samples,
                                                       std::span<const Sample> val_samples) {
  std::vector<RankingComparison> out;
  for (RankingSignal signal : {RankingSignal::gaussian, RankingSignal::mean, RankingSignal::point}) {
    TrainConfig arm = config;
    arm.loss.ranking = signal;
    if (!arm.out_dir.empty()) arm.out_dir = config.out_dir / to_string(signal);
    spdlog::info("ranking signal {}: training {} epochs", to_string(signal), arm.epochs);
    const TrainOutcome result = train(arm, train_samples, val_samples);
    out.push_back({signal, result.validation.all});
  }
  return out;
}

std::string format_ranking_table(std::span<const RankingComparison> rows) {
  std::string out = "ranking    mIoU    DSC    Acc\n";
  char buf[96];
  for (const RankingComparison& r : rows) {
    std::snprintf(buf, sizeof buf, "%-8s  %5.3f  %5.3f  %5.3f\n", to_string(r.signal), r.validation.miou,
                  r.validation.dsc, r.validation.accuracy);
    out += buf;
  }
  return out;
}

}  // namespace tseg
