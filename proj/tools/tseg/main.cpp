// SPDX-License-Identifier: Apache-2.0
//
// tseg: command line front end for the tsegformer library.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "tsegformer/checkpoint.hpp"
#include "tsegformer/dataset.hpp"
#include "tsegformer/error.hpp"
#include "tsegformer/export.hpp"
#include "tsegformer/geometry.hpp"
#include "tsegformer/inference.hpp"
#include "tsegformer/io_util.hpp"
#include "tsegformer/metrics.hpp"
#include "tsegformer/synthetic.hpp"
#include "tsegformer/training.hpp"
#include "tsegformer/version.hpp"

using namespace tseg;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Globals {
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string config_path;
  bool verbose = false;
};

/// One line on stderr describing what is about to run.
void print_resolved(const std::string& command, const Globals& g, json config) {
  json rec = {{"command", command}, {"seed", g.seed}, {"config", std::move(config)}};
  std::cerr << rec.dump() << '\n';
}

TrainConfig load_train_config(const Globals& g) {
  TrainConfig config;
  if (!g.config_path.empty()) config.apply(read_text_file(g.config_path), g.config_path);
  if (g.seed_given) config.seed = g.seed;
  return config;
}

json train_config_json(const TrainConfig& c) {
  json j = json::object();
  std::istringstream in(c.to_text());
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) j[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return j;
}

Jaw jaw_option(const std::string& s) { return parse_jaw(s); }

// features ------------------------------------------------------------------

struct FeaturesArgs {
  std::string mesh, jaw = "maxillary", out, sampling = "uniform";
  std::size_t points = 0;
};

int run_features(const FeaturesArgs& a, const Globals& g) {
  print_resolved("features", g, {{"mesh", a.mesh}, {"jaw", a.jaw}, {"points", a.points}, {"sampling", a.sampling}});
  const TriMesh mesh = load_mesh(a.mesh);
  const FaceAdjacency adj = build_adjacency(mesh);
  FeatureCloud cloud = build_features(mesh, adj, jaw_option(a.jaw));
  if (a.points > 0) {
    const SamplingMethod method = a.sampling == "fps" ? SamplingMethod::farthest_point : SamplingMethod::uniform;
    cloud = downsample(cloud, a.points, g.seed, method);
  }
  std::string csv = "face,x,y,z,nx,ny,nz,gauss,point\n";
  char buf[256];
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto r = cloud.features.row(static_cast<Eigen::Index>(i));
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", cloud.source_face[i], r(0), r(1),
                  r(2), r(3), r(4), r(5), r(6), r(7));
    csv += buf;
  }
  atomic_write(a.out, csv);
  return 0;
}

// curvature -----------------------------------------------------------------

struct CurvatureArgs {
  std::string mesh, kind = "all", out, format = "both";
};

int run_curvature(const CurvatureArgs& a, const Globals& g) {
  print_resolved("curvature", g, {{"mesh", a.mesh}, {"kind", a.kind}, {"format", a.format}});
  const TriMesh mesh = load_mesh(a.mesh);
  std::vector<CurvatureKind> kinds;
  if (a.kind == "all") {
    kinds = {CurvatureKind::gaussian, CurvatureKind::mean, CurvatureKind::point};
  } else {
    kinds = {parse_curvature_kind(a.kind)};
  }
  const FaceAdjacency adj = build_adjacency(mesh);
  for (CurvatureKind kind : kinds) {
    CurvatureField field;
    switch (kind) {
      case CurvatureKind::gaussian: field = gaussian_curvature(mesh); break;
      case CurvatureKind::mean: field = mean_curvature(mesh); break;
      case CurvatureKind::point: field = point_curvature(mesh, adj); break;
    }
    const std::string base = a.out + "." + to_string(kind);
    if (a.format == "csv" || a.format == "both") atomic_write(base + ".csv", format_field_csv(field.values));
    if (a.format == "obj" || a.format == "both") atomic_write(base + ".obj", format_field_obj(mesh, field.values));
  }
  return 0;
}

// synth ---------------------------------------------------------------------

struct SynthArgs {
  std::size_t count = 8;
  std::size_t first_index = 0;
  std::string out;
  SyntheticJawSpec spec;
};

int run_synth(const SynthArgs& a, const Globals& g) {
  print_resolved("synth", g,
                 {{"count", a.count}, {"first_index", a.first_index}, {"out", a.out},
                  {"tooth_count", a.spec.tooth_count}, {"resolution_along", a.spec.resolution_along},
                  {"resolution_across", a.spec.resolution_across},
                  {"missing_tooth_probability", a.spec.missing_tooth_probability},
                  {"missing_tooth_count", a.spec.missing_tooth_count}, {"vertex_noise", a.spec.vertex_noise}});
  a.spec.validate();
  fs::create_directories(a.out);
  write_synthetic_dataset(a.out, a.count, a.spec, g.seed, a.first_index);
  return 0;
}

// train ---------------------------------------------------------------------

struct TrainArgs {
  std::string data, val, out, resume, preset;
  std::optional<int> epochs, points, threads, checkpoint_every;
  std::optional<std::string> ranking;
};

void apply_train_overrides(TrainConfig& config, const TrainArgs& a) {
  if (!a.preset.empty()) {
    if (a.preset == "tiny") config.network = NetworkConfig::tiny();
    else if (a.preset == "default") config.network = NetworkConfig{};
    else throw Error(ErrorCode::invalid_argument, "unknown preset '" + a.preset + "'");
  }
  if (!a.data.empty()) config.train_data = a.data;
  if (!a.val.empty()) config.val_data = a.val;
  if (!a.out.empty()) config.out_dir = a.out;
  if (a.epochs) config.epochs = *a.epochs;
  if (a.points) config.points = *a.points;
  if (a.threads) config.threads = *a.threads;
  if (a.checkpoint_every) config.checkpoint_every = *a.checkpoint_every;
  if (a.ranking) config.loss.ranking = parse_ranking_signal(*a.ranking);
}

int run_train(const TrainArgs& a, const Globals& g) {
  TrainConfig config = load_train_config(g);
  apply_train_overrides(config, a);
  if (config.out_dir.empty()) throw Error(ErrorCode::invalid_argument, "train needs --out (or out_dir in the config)");
  json resolved = train_config_json(config);
  if (!a.resume.empty()) resolved["resume"] = a.resume;
  print_resolved("train", Globals{config.seed, true, g.config_path, g.verbose}, resolved);
  fs::create_directories(config.out_dir);
  atomic_write(config.out_dir / "config.txt", config.to_text());
  std::optional<fs::path> resume;
  if (!a.resume.empty()) resume = a.resume;
  const TrainOutcome outcome = train(config, resume, [](const StepRecord& r) {
    spdlog::debug("step {} epoch {} L_total {:.6f} lr {:.3g}", r.step, r.epoch, r.loss.total, r.lr);
  });
  std::cout << format_metric_table(outcome.validation);
  return 0;
}

// infer ---------------------------------------------------------------------

struct InferArgs {
  std::string mesh, jaw, checkpoint, out;
  std::optional<std::size_t> points;
  int threads = 1;
  bool export_probs = false;
};

int run_infer(const InferArgs& a, const Globals& g) {
  const Checkpoint checkpoint = load_checkpoint(a.checkpoint);
  // Default to the cloud size the model was trained on.
  std::size_t points = 10000;
  const json meta = json::parse(checkpoint.metadata, nullptr, false);
  if (meta.is_object() && meta.contains("points")) points = meta["points"].get<std::size_t>();
  if (a.points) points = *a.points;
  print_resolved("infer", g,
                 {{"mesh", a.mesh}, {"jaw", a.jaw}, {"checkpoint", a.checkpoint}, {"out", a.out}, {"points", points},
                  {"export_probs", a.export_probs}});
  const TriMesh mesh = load_mesh(a.mesh);
  InferenceOptions options;
  options.points = points;
  options.seed = g.seed;
  options.keep_probs = a.export_probs;
  options.threads = a.threads;
  const SegmentationResult result = infer_full_mesh(checkpoint.params, mesh, jaw_option(a.jaw), options);
  const ExportPaths paths = export_result(result, mesh, a.out);
  json summary = {{"faces", result.face_labels.size()},
                  {"rounds", result.rounds},
                  {"padded", result.padded},
                  {"seed", result.seed},
                  {"checkpoint_id", result.checkpoint_id},
                  {"obj", paths.obj.string()},
                  {"labels", paths.labels.string()}};
  std::cout << summary.dump() << '\n';
  return 0;
}

// eval ----------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> pred, truth, jaw;
  std::string json_out;
};

int run_eval(const EvalArgs& a, const Globals& g) {
  print_resolved("eval", g, {{"pred", a.pred}, {"truth", a.truth}, {"jaw", a.jaw}});
  if (a.pred.size() != a.truth.size()) throw Error(ErrorCode::invalid_argument, "give one --truth per --pred");
  if (!a.jaw.empty() && a.jaw.size() != a.pred.size()) {
    throw Error(ErrorCode::invalid_argument, "give one --jaw per --pred (or none)");
  }
  std::vector<MetricSummary> reports;
  std::vector<Jaw> jaws;
  for (std::size_t i = 0; i < a.pred.size(); ++i) {
    const std::vector<int> pred = read_labels(a.pred[i]);
    const std::vector<int> truth = read_labels(a.truth[i]);
    reports.push_back(evaluate(pred, truth));
    jaws.push_back(a.jaw.empty() ? Jaw::maxillary : parse_jaw(a.jaw[i]));
  }
  MetricReport report = aggregate(reports, jaws);
  if (a.jaw.empty()) report.maxillary.reset();
  std::cout << format_metric_table(report);
  if (!a.json_out.empty()) atomic_write(a.json_out, metrics_to_json(report));
  return 0;
}

// compare-curvatures --------------------------------------------------------

struct CompareArgs {
  std::string data, val, out, preset;
  std::optional<int> epochs, points;
};

int run_compare(const CompareArgs& a, const Globals& g) {
  TrainConfig config = load_train_config(g);
  TrainArgs t;
  t.data = a.data;
  t.val = a.val;
  t.out = a.out;
  t.preset = a.preset;
  t.epochs = a.epochs;
  t.points = a.points;
  apply_train_overrides(config, t);
  config.validate(true);
  print_resolved("compare-curvatures", Globals{config.seed, true, g.config_path, g.verbose}, train_config_json(config));
  const std::vector<Sample> train_samples = load_dataset(config.train_data);
  std::vector<Sample> val_samples;
  if (!config.val_data.empty()) val_samples = load_dataset(config.val_data);
  const std::vector<RankingComparison> rows = compare_ranking_signals(config, train_samples, val_samples);
  const std::string table = format_ranking_table(rows);
  std::cout << table;
  if (!config.out_dir.empty()) {
    fs::create_directories(config.out_dir);
    atomic_write(config.out_dir / "ranking_comparison.txt", table);
  }
  return 0;
}

void print_error(const std::string& code, const std::string& message) {
  std::cerr << json{{"error", code}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("tseg");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Tooth segmentation on intraoral mesh scans"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->each([&](const std::string&) { g.seed_given = true; });
  app.add_option("--config", g.config_path, "Training config file (key = value)")->check(CLI::ExistingFile);
  app.add_flag("--verbose,-v", g.verbose, "Debug logging");
  app.set_version_flag("--version",
                       std::string("tseg ") + tseg::version_string() + " (checkpoint format " +
                           std::to_string(kCheckpointVersion) + ")");

  FeaturesArgs fa;
  auto* features = app.add_subcommand("features", "Write the per-face input feature matrix as CSV");
  features->add_option("--mesh", fa.mesh)->required()->check(CLI::ExistingFile);
  features->add_option("--jaw", fa.jaw)->check(CLI::IsMember({"maxillary", "mandible"}));
  features->add_option("--out", fa.out)->required();
  features->add_option("--points", fa.points, "Downsample to this many rows (0 keeps every face)");
  features->add_option("--sampling", fa.sampling)->check(CLI::IsMember({"uniform", "fps"}));

  CurvatureArgs ca;
  auto* curvature = app.add_subcommand("curvature", "Export per-face curvature fields");
  curvature->add_option("--mesh", ca.mesh)->required()->check(CLI::ExistingFile);
  curvature->add_option("--kind", ca.kind)->check(CLI::IsMember({"gaussian", "mean", "point", "all"}));
  curvature->add_option("--out", ca.out, "Output prefix; writes <prefix>.<kind>.csv/.obj")->required();
  curvature->add_option("--format", ca.format)->check(CLI::IsMember({"csv", "obj", "both"}));

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic dataset");
  synth->add_option("--count", sa.count)->check(CLI::PositiveNumber);
  synth->add_option("--first-index", sa.first_index);
  synth->add_option("--out", sa.out)->required();
  synth->add_option("--tooth-count", sa.spec.tooth_count);
  synth->add_option("--resolution-along", sa.spec.resolution_along);
  synth->add_option("--resolution-across", sa.spec.resolution_across);
  synth->add_option("--missing-prob", sa.spec.missing_tooth_probability);
  synth->add_option("--missing-count", sa.spec.missing_tooth_count);
  synth->add_option("--noise", sa.spec.vertex_noise, "Vertex noise sigma (mm)");

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--data", ta.data, "Training dataset directory");
  train_cmd->add_option("--val", ta.val, "Validation dataset directory");
  train_cmd->add_option("--out", ta.out, "Output directory");
  train_cmd->add_option("--resume", ta.resume, "Checkpoint to resume from")->check(CLI::ExistingFile);
  train_cmd->add_option("--preset", ta.preset)->check(CLI::IsMember({"tiny", "default"}));
  train_cmd->add_option("--epochs", ta.epochs);
  train_cmd->add_option("--points", ta.points);
  train_cmd->add_option("--threads", ta.threads);
  train_cmd->add_option("--checkpoint-every", ta.checkpoint_every);
  train_cmd->add_option("--ranking", ta.ranking)->check(CLI::IsMember({"point", "gaussian", "mean", "none"}));

  InferArgs ia;
  auto* infer = app.add_subcommand("infer", "Segment a full-resolution mesh");
  infer->add_option("--mesh", ia.mesh)->required()->check(CLI::ExistingFile);
  infer->add_option("--jaw", ia.jaw)->required()->check(CLI::IsMember({"maxillary", "mandible"}));
  infer->add_option("--checkpoint", ia.checkpoint)->required()->check(CLI::ExistingFile);
  infer->add_option("--out", ia.out, "Output path; writes .obj, .mtl, .labels, .aux.labels")->required();
  infer->add_option("--points", ia.points, "Points per inference round (default: training size)");
  infer->add_option("--threads", ia.threads);
  infer->add_flag("--export-probs", ia.export_probs, "Also write per-face class probabilities");

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "Score predicted label sidecars against ground truth");
  eval->add_option("--pred", ea.pred)->required()->check(CLI::ExistingFile);
  eval->add_option("--truth", ea.truth)->required()->check(CLI::ExistingFile);
  eval->add_option("--jaw", ea.jaw)->check(CLI::IsMember({"maxillary", "mandible"}));
  eval->add_option("--json", ea.json_out, "Also write the report as JSON");

  CompareArgs cpa;
  auto* compare = app.add_subcommand("compare-curvatures", "Train one short run per hard-point ranking signal");
  compare->add_option("--data", cpa.data);
  compare->add_option("--val", cpa.val);
  compare->add_option("--out", cpa.out);
  compare->add_option("--preset", cpa.preset)->check(CLI::IsMember({"tiny", "default"}));
  compare->add_option("--epochs", cpa.epochs);
  compare->add_option("--points", cpa.points);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }
  spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*features) return run_features(fa, g);
    if (*curvature) return run_curvature(ca, g);
    if (*synth) return run_synth(sa, g);
    if (*train_cmd) return run_train(ta, g);
    if (*infer) return run_infer(ia, g);
    if (*eval) return run_eval(ea, g);
    if (*compare) return run_compare(cpa, g);
  } catch (const tseg::Error& e) {
    print_error(tseg::to_string(e.code()), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
