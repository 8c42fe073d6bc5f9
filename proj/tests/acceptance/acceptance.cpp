// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero if any selected criterion fails.
//
//   tseg_acceptance            run all criteria
//   tseg_acceptance --only 4   run a subset (repeatable, or comma separated)
//   tseg_acceptance --list

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support/test_meshes.hpp"
#include "tsegformer/dataset.hpp"
#include "tsegformer/error.hpp"
#include "tsegformer/geometry.hpp"
#include "tsegformer/inference.hpp"
#include "tsegformer/io_util.hpp"
#include "tsegformer/losses.hpp"
#include "tsegformer/metrics.hpp"
#include "tsegformer/network.hpp"
#include "tsegformer/rng.hpp"
#include "tsegformer/synthetic.hpp"
#include "tsegformer/training.hpp"

namespace fs = std::filesystem;
using namespace tseg;
using tseg::testing::icosphere;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
  void note(const std::string& what) {
    if (pass) detail += (detail.empty() ? "" : "; ") + what;
  }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tseg_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// 1 ---------------------------------------------------------------------------

/// Independent point-curvature oracle: second-order neighborhoods found by
/// brute-force vertex comparison, angles via 2 asin(|a - b| / 2).
std::vector<double> brute_force_point_curvature(const TriMesh& mesh) {
  const std::size_t n = mesh.face_count();
  auto shares_edge = [&](std::size_t a, std::size_t b) {
    int common = 0;
    for (std::int32_t u : mesh.faces[a]) {
      for (std::int32_t v : mesh.faces[b]) common += u == v;
    }
    return common >= 2;
  };
  std::vector<std::vector<std::size_t>> first(n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a != b && shares_edge(a, b)) first[a].push_back(b);
    }
  }
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::set<std::size_t> hood(first[i].begin(), first[i].end());
    for (std::size_t j : first[i]) hood.insert(first[j].begin(), first[j].end());
    hood.erase(i);
    double sum = 0.0;
    for (std::size_t j : hood) sum += 2.0 * std::asin(std::min(1.0, (mesh.face_normal[i] - mesh.face_normal[j]).norm() / 2.0));
    out[i] = hood.empty() ? 0.0 : sum / static_cast<double>(hood.size());
  }
  return out;
}

std::vector<double> point_field(const TriMesh& mesh) { return point_curvature(mesh, build_adjacency(mesh)).values; }

Outcome criterion_geometry_oracles() {
  Outcome o;
  // Flat grid: every normal is identical, so m_i vanishes in the interior.
  {
    const TriMesh grid = tseg::testing::flat_grid(12, 9);
    const std::vector<double> m = point_field(grid);
    double worst = 0.0;
    for (double v : m) worst = std::max(worst, std::abs(v));
    o.check(worst <= 1e-12, "flat grid max |m| = " + fmt("%.3g", worst));
  }
  // Range and invariances on 100 randomized meshes.
  Rng rng(2024);
  double worst_rot = 0.0;
  double worst_scale_pow2 = 0.0;
  double worst_scale_any = 0.0;
  bool in_range = true;
  for (int k = 0; k < 100; ++k) {
    const TriMesh mesh = k % 2 == 0 ? tseg::testing::wavy_grid(10, rng.uniform(0.2, 3.0), 0.3, 500 + k)
                                    : tseg::testing::jittered(icosphere(1), 0.05, 900 + k);
    const std::vector<double> m = point_field(mesh);
    for (double v : m) in_range = in_range && v >= 0.0 && v <= std::numbers::pi;

    const Eigen::Matrix3d r = tseg::testing::random_rotation(rng);
    const Vec3 t(rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-5, 5));
    const std::vector<double> mr = point_field(tseg::testing::transformed(mesh, r, t));
    // Powers of two scale every coordinate without rounding, so the result
    // must match bit for bit.
    const std::vector<double> ms = point_field(tseg::testing::scaled(mesh, k % 3 == 0 ? 0.25 : 8.0));
    const std::vector<double> ma = point_field(tseg::testing::scaled(mesh, rng.uniform(0.1, 20.0)));
    for (std::size_t i = 0; i < m.size(); ++i) {
      worst_rot = std::max(worst_rot, std::abs(m[i] - mr[i]));
      worst_scale_pow2 = std::max(worst_scale_pow2, std::abs(m[i] - ms[i]));
      worst_scale_any = std::max(worst_scale_any, std::abs(m[i] - ma[i]));
    }
  }
  o.check(in_range, "m_i outside [0, pi]");
  o.check(worst_rot <= 1e-9, "rotation deviation " + fmt("%.3g", worst_rot));
  o.check(worst_scale_pow2 == 0.0, "power-of-two scaling deviation " + fmt("%.3g", worst_scale_pow2));
  o.check(worst_scale_any <= 1e-12, "arbitrary scaling deviation " + fmt("%.3g", worst_scale_any));
  // Icosphere against the brute-force oracle.
  double worst_oracle = 0.0;
  for (int level = 0; level <= 2; ++level) {
    const TriMesh sphere = tseg::testing::jittered(icosphere(level), level == 0 ? 0.0 : 0.01, 77 + level);
    const std::vector<double> fast = point_field(sphere);
    const std::vector<double> slow = brute_force_point_curvature(sphere);
    for (std::size_t i = 0; i < fast.size(); ++i) worst_oracle = std::max(worst_oracle, std::abs(fast[i] - slow[i]));
  }
  o.check(worst_oracle <= 1e-12, "oracle deviation " + fmt("%.3g", worst_oracle));
  o.note("rotation dev " + fmt("%.2g", worst_rot) + ", scaling dev " + fmt("%.2g", worst_scale_any) +
         ", oracle dev " + fmt("%.2g", worst_oracle));
  return o;
}

// 2 ---------------------------------------------------------------------------

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

Outcome criterion_gauss_bonnet() {
  Outcome o;
  double worst = 0.0;
  std::vector<TriMesh> closed;
  for (int level = 0; level <= 4; ++level) closed.push_back(icosphere(level));
  for (int k = 0; k < 10; ++k) closed.push_back(tseg::testing::jittered(icosphere(2, 3.0), 0.08, 40 + k));
  {
    // Elongated, rotated ellipsoid.
    TriMesh e = icosphere(3);
    std::vector<Vec3> v = e.vertices;
    for (Vec3& p : v) p = Vec3(3.0 * p.x(), 0.7 * p.y(), 1.4 * p.z());
    closed.push_back(make_mesh(v, e.faces));
  }
  for (const TriMesh& m : closed) {
    double total = 0.0;
    for (double d : vertex_angle_deficit(m)) total += d;
    worst = std::max(worst, std::abs(total - 4.0 * std::numbers::pi));
  }
  o.check(worst <= 1e-9, "total deficit off by " + fmt("%.3g", worst));

  const double k_mean = mean_of(gaussian_curvature(icosphere(4, 1.0)).values);
  o.check(std::abs(k_mean - 1.0) <= 0.05, "unit sphere mean K = " + fmt("%.4f", k_mean));
  const double h_mean = mean_of(mean_curvature(icosphere(4, 2.0)).values);
  o.check(std::abs(h_mean - 0.5) <= 0.05, "radius-2 sphere mean H = " + fmt("%.4f", h_mean));
  o.note("deficit dev " + fmt("%.2g", worst) + ", mean K " + fmt("%.4f", k_mean) + ", mean H " + fmt("%.4f", h_mean));
  return o;
}

// 3 ---------------------------------------------------------------------------

Outcome criterion_loss_identities() {
  Outcome o;
  Rng rng(3);
  const int n = 40;
  std::vector<int> labels(n);
  for (int& l : labels) l = static_cast<int>(rng.index(kNumClasses));
  std::vector<double> rank(n);
  for (double& r : rank) r = rng.uniform();
  const HardPointSet hard = select_hard_points(rank, 0.4);

  nn::Mat<double> perfect = nn::Mat<double>::Zero(n, kNumClasses);
  for (int i = 0; i < n; ++i) perfect(i, labels[i]) = 1.0;
  const double l_perfect = geo_loss(perfect, labels, hard, 2.0);
  o.check(l_perfect == 0.0, "perfect prediction L_geo = " + fmt("%.3g", l_perfect));

  nn::Mat<double> probs(n, kNumClasses);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < kNumClasses; ++c) probs(i, c) = rng.uniform(0.01, 1.0);
    probs.row(i) /= probs.row(i).sum();
  }
  double ce = 0.0;
  for (std::size_t idx : hard.indices) ce += -std::log(probs(static_cast<Eigen::Index>(idx), labels[idx]));
  const double l_gamma0 = geo_loss(probs, labels, hard, 0.0);
  o.check(l_gamma0 == ce, "gamma = 0 differs from summed cross-entropy by " + fmt("%.3g", l_gamma0 - ce));

  nn::Mat<double> half(1, 2);
  half << 0.5, 0.5;
  const std::vector<int> one{0};
  const double single = geo_loss(half, one, select_hard_points(std::vector<double>{1.0}, 0.4), 2.0);
  o.check(std::abs(single - 0.1732868) <= 1e-6, "single point loss " + fmt("%.9f", single));

  for (std::size_t count : {7u, 10u, 10000u}) {
    const std::vector<double> r(count, 0.0);
    const std::size_t want = static_cast<std::size_t>(std::ceil(0.4 * static_cast<double>(count) - 1e-9));
    const std::size_t got = select_hard_points(r, 0.4).indices.size();
    o.check(got == want, "|S(0.4)| for N=" + std::to_string(count) + " is " + std::to_string(got));
  }
  o.note("single point " + fmt("%.7f", single) + "; |S| = 3, 4, 4000");
  return o;
}

// 4 ---------------------------------------------------------------------------

Outcome criterion_gradients() {
  Outcome o;
  NetworkConfig c;
  c.embed_dim = 8;
  c.point_dim = 16;
  c.category_dim = 4;
  c.k_nn = 6;
  c.n_heads = 2;
  c.n_layers = 2;
  c.head_hidden = {8};
  c.dropout = 0.1;
  const Network<double> net(c);
  const int n = 32;
  LossWeights weights;
  weights.omega_geo = 0.1;  // large enough that the focal term visibly contributes

  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst_rel = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    NetworkParams<double> params = init_params<double>(c, 100 + seed);
    Rng rng(seed);
    nn::Mat<double> x(n, 8);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1.0, 1.0);
    std::vector<int> labels(n);
    for (int& l : labels) l = static_cast<int>(rng.index(kNumClasses));
    std::vector<double> rank(n);
    for (double& r : rank) r = rng.uniform();
    const HardPointSet hard = select_hard_points(rank, 0.4);
    const Eigen::Vector2d category = seed % 2 ? Eigen::Vector2d(0, 1) : Eigen::Vector2d(1, 0);

    ForwardOptions<double> options;
    options.training = true;
    options.dropout_seed = 7 + seed;
    ForwardCache<double> cache;
    const NetworkOutput<double> out = net.forward(params, x, category, &cache, options);
    const LossEvaluation eval = evaluate_losses(out.seg_logits, out.aux_logits, labels, hard, weights);
    const ParamSet<double> grads = net.backward(params, cache, eval.d_seg_logits, eval.d_aux_logits);

    // Replaying the recorded discrete choices (neighbor lists, max-pool and
    // EdgeConv argmax, activation gates, dropout masks) keeps the perturbed
    // evaluations on the same smooth piece as the analytic gradient.
    ForwardOptions<double> replay = options;
    replay.frozen = &cache;
    auto loss_at = [&]() {
      const NetworkOutput<double> y = net.forward(params, x, category, nullptr, replay);
      return evaluate_losses(y.seg_logits, y.aux_logits, labels, hard, weights).report.total;
    };
    for (std::size_t t = 0; t < params.tensors.size(); ++t) {
      nn::Mat<double>& w = params.tensors[t];
      for (Eigen::Index e = 0; e < w.size(); ++e) {
        const double orig = w.data()[e];
        const double h = 1e-5 * std::max(1.0, std::abs(orig));
        w.data()[e] = orig + h;
        const double up = loss_at();
        w.data()[e] = orig - h;
        const double down = loss_at();
        w.data()[e] = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double analytic = grads[t].data()[e];
        const double diff = std::abs(numeric - analytic);
        const double scale = std::max(std::abs(numeric), std::abs(analytic));
        ++checked;
        // rtol 1e-3, with an absolute floor for entries that are zero up to
        // finite-difference noise.
        if (diff > 1e-3 * scale && diff > 1e-8) {
          if (failed < 3) o.check(false, params.tensors.name(t) + "[" + std::to_string(e) + "] analytic " +
                                             fmt("%.6g", analytic) + " numeric " + fmt("%.6g", numeric));
          ++failed;
        }
        if (scale > 1e-6) worst_rel = std::max(worst_rel, diff / scale);
      }
    }
  }
  o.check(failed == 0, std::to_string(failed) + " of " + std::to_string(checked) + " entries disagree");
  o.note(std::to_string(checked) + " entries over 5 seeds, worst rel err " + fmt("%.2g", worst_rel));
  return o;
}

// 5 ---------------------------------------------------------------------------

Outcome criterion_equivariance() {
  Outcome o;
  const NetworkConfig c = NetworkConfig::tiny();
  const NetworkParams<float> params = init_params<float>(c, 5);
  const Network<float> net(c);
  Rng rng(55);
  const int n = 300;
  nn::Mat<float> x(n, 8);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
  const std::vector<std::size_t> perm = permutation(n, rng);
  nn::Mat<float> xp(n, 8);
  for (int i = 0; i < n; ++i) xp.row(i) = x.row(static_cast<Eigen::Index>(perm[i]));

  double worst = 0.0;
  double worst_sum = 0.0;
  for (const Eigen::Vector2d& cat : {Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)}) {
    const NetworkOutput<float> a = net.forward(params, x, cat);
    const NetworkOutput<float> b = net.forward(params, xp, cat);
    o.check(a.seg_logits.rows() == n && a.seg_logits.cols() == 33, "seg output shape");
    o.check(a.aux_logits.rows() == n && a.aux_logits.cols() == 2, "aux output shape");
    for (int i = 0; i < n; ++i) {
      const auto src = static_cast<Eigen::Index>(perm[i]);
      worst = std::max<double>(worst, (b.seg_logits.row(i) - a.seg_logits.row(src)).cwiseAbs().maxCoeff());
      worst = std::max<double>(worst, (b.aux_logits.row(i) - a.aux_logits.row(src)).cwiseAbs().maxCoeff());
    }
    for (const nn::Mat<float>* logits : {&a.seg_logits, &a.aux_logits}) {
      const nn::Mat<double> p = nn::softmax_rows<double>(logits->cast<double>());
      for (int i = 0; i < n; ++i) worst_sum = std::max(worst_sum, std::abs(p.row(i).sum() - 1.0));
    }
  }
  o.check(worst <= 1e-5, "permutation deviation " + fmt("%.3g", worst));
  o.check(worst_sum <= 1e-6, "softmax row sum deviation " + fmt("%.3g", worst_sum));
  o.note("permutation dev " + fmt("%.2g", worst) + ", shapes N x 33 and N x 2");
  return o;
}

// 6 ---------------------------------------------------------------------------

Outcome criterion_overfit() {
  Outcome o;
  const std::vector<Sample> samples = synthetic_samples(8, SyntheticJawSpec{}, 6);
  TrainConfig config;
  config.network = NetworkConfig::tiny();
  config.points = 512;
  config.epochs = 300;
  config.seed = 6;
  // Memorization test: augmentation would only slow it down, and the larger
  // step size gives a clear margin within the epoch budget.
  config.augment = false;
  config.learning_rate = 2e-3;
  const auto t0 = std::chrono::steady_clock::now();
  const TrainOutcome run = train(config, samples, {});
  const double minutes = seconds_since(t0) / 60.0;
  // Every face of every training jaw, labeled in training-size chunks.
  const double acc = evaluate_samples(run.params, samples, static_cast<std::size_t>(config.points), 99).all.accuracy;
  o.check(acc >= 0.99, "training accuracy " + fmt("%.4f", acc));
  o.check(minutes < 30.0, "took " + fmt("%.1f", minutes) + " min");

  TrainConfig plain = config;
  plain.epochs = 20;
  plain.loss.omega_geo = 0.0;
  plain.loss.omega_aux = 0.0;
  const TrainOutcome seg_only = train(plain, samples, {});
  std::size_t mismatches = 0;
  for (const StepRecord& r : seg_only.log) mismatches += r.loss.total != r.loss.seg;
  o.check(mismatches == 0, std::to_string(mismatches) + " steps with L_total != L_seg");
  o.note("training accuracy " + fmt("%.4f", acc) + " over all faces after 300 epochs (" + fmt("%.1f", minutes) +
         " min); L_total == L_seg on all " + std::to_string(seg_only.log.size()) + " steps");
  return o;
}

// 7 ---------------------------------------------------------------------------

Outcome criterion_generalization() {
  Outcome o;
  const SyntheticJawSpec spec;
  const std::vector<Sample> train_set = synthetic_samples(64, spec, 70);
  const std::vector<Sample> test_set = synthetic_samples(16, spec, 70, 64);
  TrainConfig config;
  config.network = NetworkConfig::tiny();
  config.points = 512;
  config.epochs = 60;
  config.seed = 7;
  const auto t0 = std::chrono::steady_clock::now();
  const TrainOutcome run = train(config, train_set, test_set);

  std::vector<MetricSummary> reports;
  std::vector<Jaw> jaws;
  std::size_t aux_ok = 0;
  std::size_t aux_total = 0;
  for (std::size_t i = 0; i < test_set.size(); ++i) {
    InferenceOptions options;
    options.points = static_cast<std::size_t>(config.points);
    options.seed = 1000 + i;
    const SegmentationResult r = infer_full_mesh(run.params, test_set[i].mesh, test_set[i].jaw, options);
    reports.push_back(evaluate(r.face_labels, test_set[i].labels));
    jaws.push_back(test_set[i].jaw);
    const std::vector<int> truth = tooth_gingiva_labels(test_set[i].labels);
    for (std::size_t f = 0; f < truth.size(); ++f) aux_ok += r.aux_labels[f] == truth[f];
    aux_total += truth.size();
  }
  const MetricReport m = aggregate(reports, jaws);
  const double aux_acc = static_cast<double>(aux_ok) / static_cast<double>(aux_total);
  const double hours = seconds_since(t0) / 3600.0;
  o.check(m.all.accuracy >= 0.90, "face accuracy " + fmt("%.4f", m.all.accuracy));
  o.check(m.all.miou >= 0.75, "mIoU " + fmt("%.4f", m.all.miou));
  o.check(aux_acc >= 0.95, "aux accuracy " + fmt("%.4f", aux_acc));
  o.check(hours < 2.0, "took " + fmt("%.2f", hours) + " h");
  o.note("held-out acc " + fmt("%.4f", m.all.accuracy) + ", mIoU " + fmt("%.4f", m.all.miou) + ", aux acc " +
         fmt("%.4f", aux_acc) + " (" + fmt("%.1f", hours * 60.0) + " min)");
  return o;
}

// 8 ---------------------------------------------------------------------------

Outcome criterion_inference_protocol() {
  Outcome o;
  SyntheticJawSpec spec;
  spec.seed = 8;
  spec.resolution_along = 126;
  spec.resolution_across = 101;
  const SyntheticJaw jaw = generate_synthetic_jaw(spec);
  o.check(jaw.mesh.face_count() == 25000, "mesh has " + std::to_string(jaw.mesh.face_count()) + " faces");

  const NetworkParams<float> params = init_params<float>(NetworkConfig::tiny(), 8);
  InferenceOptions options;
  options.points = 10000;
  options.seed = 31;
  const SegmentationResult a = infer_full_mesh(params, jaw.mesh, jaw.jaw, options);
  options.threads = 3;
  const SegmentationResult b = infer_full_mesh(params, jaw.mesh, jaw.jaw, options);
  o.check(a.rounds == 3, std::to_string(a.rounds) + " rounds");
  o.check(a.padded == 5000, std::to_string(a.padded) + " padded rows");
  o.check(a.face_labels.size() == jaw.mesh.face_count() && a.aux_labels.size() == jaw.mesh.face_count(),
          "label count mismatch");
  bool in_range = true;
  for (int l : a.face_labels) in_range = in_range && l >= 0 && l < kNumClasses;
  o.check(in_range, "label out of range");
  o.check(a == b, "repeat run differs");

  const ChunkPlan plan = plan_chunks(25000, 10000, 31);
  std::vector<int> seen(25000, 0);
  for (std::size_t r = 0; r < plan.rounds(); ++r) {
    const std::size_t own = r + 1 < plan.rounds() ? plan.chunks[r].size() : plan.chunks[r].size() - plan.padded;
    for (std::size_t i = 0; i < own; ++i) ++seen[plan.chunks[r][i]];
  }
  const bool exactly_once = std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
  o.check(exactly_once, "chunk coverage is not exactly once");
  o.note("25000 faces, 3 rounds, 5000 padded, identical across runs and thread counts");
  return o;
}

// 9 ---------------------------------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + TSEG_CLI_PATH + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  return std::system(cmd.c_str());
}

Outcome criterion_curvature_ranking() {
  Outcome o;
  // Geometry: point curvature concentrates near label boundaries.
  double near_sum = 0.0, far_sum = 0.0;
  std::size_t near_n = 0, far_n = 0;
  for (const Sample& s : synthetic_samples(4, SyntheticJawSpec{}, 90, 200)) {
    const FaceAdjacency adj = build_adjacency(s.mesh);
    const std::vector<double> m = point_curvature(s.mesh, adj).values;
    std::vector<bool> boundary(s.mesh.face_count(), false);
    for (std::size_t f = 0; f < boundary.size(); ++f) {
      for (std::uint32_t g : adj.first_order[f]) boundary[f] = boundary[f] || s.labels[g] != s.labels[f];
    }
    std::vector<bool> near = boundary;
    for (std::size_t f = 0; f < boundary.size(); ++f) {
      if (!boundary[f]) continue;
      for (std::uint32_t g : adj.second_order[f]) near[g] = true;
    }
    for (std::size_t f = 0; f < m.size(); ++f) {
      (near[f] ? near_sum : far_sum) += m[f];
      ++(near[f] ? near_n : far_n);
    }
  }
  const double near_mean = near_sum / static_cast<double>(near_n);
  const double far_mean = far_sum / static_cast<double>(far_n);
  o.check(near_mean > far_mean, "near-boundary mean " + fmt("%.4f", near_mean) + " <= off-boundary mean " +
                                    fmt("%.4f", far_mean));

  // The three-arm comparison through the command line tool.
  const fs::path dir = scratch_dir("ranking");
  bool ok = run_cli("--seed 9 synth --count 16 --out \"" + (dir / "train").string() + "\"", dir / "synth1.log") == 0;
  ok = ok && run_cli("--seed 9 synth --count 4 --first-index 16 --out \"" + (dir / "val").string() + "\"",
                     dir / "synth2.log") == 0;
  ok = ok && run_cli("--seed 9 compare-curvatures --preset tiny --epochs 60 --points 512 --data \"" +
                         (dir / "train").string() + "\" --val \"" + (dir / "val").string() + "\" --out \"" +
                         (dir / "cmp").string() + "\"",
                     dir / "compare.log") == 0;
  o.check(ok, "tseg compare-curvatures failed (see " + dir.string() + ")");
  std::string ordering;
  if (ok) {
    std::istringstream table(read_text_file(dir / "cmp" / "ranking_comparison.txt"));
    std::string line;
    std::getline(table, line);  // header
    std::vector<std::pair<double, std::string>> rows;
    while (std::getline(table, line)) {
      std::istringstream fields(line);
      std::string name;
      double miou = NAN;
      fields >> name >> miou;
      if (!name.empty()) rows.emplace_back(miou, name);
    }
    const bool arms = rows.size() == 3 && std::all_of(rows.begin(), rows.end(), [](const auto& r) {
      return std::isfinite(r.first);
    });
    o.check(arms, "expected three arms with finite mIoU");
    std::sort(rows.rbegin(), rows.rend());
    for (const auto& [miou, name] : rows) ordering += (ordering.empty() ? "" : " > ") + name + " " + fmt("%.3f", miou);
  }
  o.note("boundary m " + fmt("%.4f", near_mean) + " vs " + fmt("%.4f", far_mean) + "; mIoU " + ordering);
  return o;
}

// 10 --------------------------------------------------------------------------

Outcome criterion_metrics_oracle() {
  Outcome o;
  const std::vector<int> truth{0, 0, 1, 1};
  const std::vector<int> pred{0, 1, 1, 1};
  const MetricSummary s = evaluate(pred, truth);
  o.check(s.accuracy == 0.75, "accuracy " + fmt("%.17g", s.accuracy));
  o.check(s.miou == 7.0 / 12.0, "mIoU " + fmt("%.17g", s.miou));
  o.check(s.dsc == 11.0 / 15.0, "DSC " + fmt("%.17g", s.dsc));

  Rng rng(10);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.index(400);
    const int classes = 2 + static_cast<int>(rng.index(kNumClasses - 1));
    std::vector<int> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng.index(static_cast<std::size_t>(classes)));
      b[i] = rng.uniform() < 0.6 ? a[i] : static_cast<int>(rng.index(static_cast<std::size_t>(classes)));
    }
    const MetricSummary r = evaluate(a, b);
    for (int c = 0; c < kNumClasses; ++c) {
      if (!r.per_class_iou[c]) continue;
      const double iou = *r.per_class_iou[c];
      worst = std::max(worst, std::abs(*r.per_class_dsc[c] - 2.0 * iou / (1.0 + iou)));
    }
  }
  o.check(worst <= 1e-12, "DSC identity deviation " + fmt("%.3g", worst));
  o.note("acc 0.75, mIoU 7/12, DSC 11/15 exact; identity dev " + fmt("%.2g", worst));
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "geometry oracles", criterion_geometry_oracles},
      {2, "Gauss-Bonnet and sphere curvature", criterion_gauss_bonnet},
      {3, "focal loss identities", criterion_loss_identities},
      {4, "gradient correctness", criterion_gradients},
      {5, "permutation equivariance", criterion_equivariance},
      {6, "overfit 8 synthetic jaws", criterion_overfit},
      {7, "generalization smoke test", criterion_generalization},
      {8, "inference protocol", criterion_inference_protocol},
      {9, "curvature ranking direction", criterion_curvature_ranking},
      {10, "metrics oracle", criterion_metrics_oracle},
  };
  return all;
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--list") {
      for (const Criterion& c : criteria()) std::printf("%d %s\n", c.id, c.name);
      return 0;
    }
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
      continue;
    }
    std::fprintf(stderr, "usage: %s [--list] [--only N[,M...]]\n", argv[0]);
    return 2;
  }
  int failures = 0;
  for (const Criterion& c : criteria()) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out.pass = false;
      out.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s  %2d %-36s %8.1fs  %s\n", out.pass ? "PASS" : "FAIL", c.id, c.name, seconds_since(t0),
                out.detail.c_str());
    std::fflush(stdout);
    failures += !out.pass;
  }
  return failures == 0 ? 0 : 1;
}
