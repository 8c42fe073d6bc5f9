// SPDX-License-Identifier: Apache-2.0
#include "tsegformer/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "tsegformer/error.hpp"
#include "tsegformer/rng.hpp"

namespace tseg {

int fdi_to_class(int fdi) {
  const int quadrant = fdi / 10;
  const int position = fdi % 10;
  if (quadrant < 1 || quadrant > 4 || position < 1 || position > 8) {
    throw Error(ErrorCode::invalid_argument, "invalid FDI tooth code " + std::to_string(fdi));
  }
  static constexpr int kQuadrantBase[5] = {0, 0, 8, 16, 24};
  return kQuadrantBase[quadrant] + position;
}

int class_to_fdi(int class_id) {
  if (class_id < 1 || class_id > 32) throw Error(ErrorCode::invalid_argument, "class id has no FDI code");
  static constexpr int kQuadrant[4] = {1, 2, 3, 4};
  const int q = (class_id - 1) / 8;
  return kQuadrant[q] * 10 + (class_id - 1) % 8 + 1;
}

void SyntheticJawSpec::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::invalid_argument, "synthetic jaw: " + what);
  };
  require(tooth_count >= 2 && tooth_count <= 16 && tooth_count % 2 == 0, "tooth_count must be even and in [2, 16]");
  require(arch_width > 0 && arch_depth > 0 && strip_width > 0, "arch dimensions must be positive");
  require(tooth_height_min > 0 && tooth_height_max >= tooth_height_min, "invalid tooth height range");
  require(shape_jitter >= 0 && shape_jitter < 0.5, "shape_jitter must lie in [0, 0.5)");
  require(missing_tooth_probability >= 0 && missing_tooth_probability <= 1, "missing_tooth_probability must lie in [0, 1]");
  require(missing_tooth_count >= 0 && missing_tooth_count < tooth_count, "missing_tooth_count must be < tooth_count");
  require(vertex_noise >= 0, "vertex_noise must be >= 0");
  // At least four samples per tooth along the arch and three across a crown.
  require(resolution_along >= 4 * tooth_count + 2,
          "resolution_along is too low to represent " + std::to_string(tooth_count) + " teeth");
  require(resolution_across >= 8, "resolution_across is too low to represent tooth crowns");
  const double half_width = 0.5 * arch_width * (1.0 + shape_jitter);
  const double depth = arch_depth * (1.0 - shape_jitter);
  const double apex_radius = half_width * half_width / (2.0 * depth);
  require(0.5 * strip_width < 0.9 * apex_radius, "strip_width is too wide for the arch curvature");
}

namespace {

// Mesio-distal crown widths (mm) by position 1 (central incisor) .. 8 (third molar).
constexpr double kUpperWidths[8] = {8.5, 6.6, 7.6, 7.0, 6.6, 10.2, 9.2, 8.6};
constexpr double kLowerWidths[8] = {5.3, 5.9, 6.9, 7.0, 7.1, 11.0, 10.4, 10.0};

struct Tooth {
  int class_id;
  int position;
  double center;      // arc length
  double half_length; // along the arch
  double half_width;  // across the strip
  double height;
  bool present;
};

struct ArchCurve {
  double half_width;
  double depth;
  std::vector<double> t_samples;
  std::vector<double> s_samples;

  Eigen::Vector2d point(double t) const { return {half_width * t, depth * (1.0 - t * t)}; }
  Eigen::Vector2d tangent(double t) const { return Eigen::Vector2d(half_width, -2.0 * depth * t).normalized(); }

  double length() const { return s_samples.back(); }

  /// Parameter t at arc length s (linear interpolation in the sample table).
  double t_at(double s) const {
    auto it = std::lower_bound(s_samples.begin(), s_samples.end(), s);
    if (it == s_samples.begin()) return t_samples.front();
    if (it == s_samples.end()) return t_samples.back();
    const std::size_t k = static_cast<std::size_t>(it - s_samples.begin());
    const double f = (s - s_samples[k - 1]) / (s_samples[k] - s_samples[k - 1]);
    return t_samples[k - 1] + f * (t_samples[k] - t_samples[k - 1]);
  }
};

ArchCurve make_arch(double half_width, double depth) {
  ArchCurve arch{half_width, depth, {}, {}};
  constexpr int kSamples = 4001;
  double s = 0.0;
  Eigen::Vector2d prev = arch.point(-1.0);
  for (int i = 0; i < kSamples; ++i) {
    const double t = -1.0 + 2.0 * i / (kSamples - 1);
    const Eigen::Vector2d p = arch.point(t);
    s += (p - prev).norm();
    prev = p;
    arch.t_samples.push_back(t);
    arch.s_samples.push_back(s);
  }
  return arch;
}

/// Crown profile: rho is the superelliptic radius (1 at the margin).
double crown_height(const Tooth& tooth, double ds, double w) {
  const double x = ds / tooth.half_length;
  const double y = w / tooth.half_width;
  const double rho4 = x * x * x * x + y * y * y * y;
  if (rho4 >= 1.0) return 0.0;
  double h = tooth.height * std::pow(1.0 - rho4, 0.3);
  if (tooth.position >= 4) {
    // Cusps on premolars and molars.
    h *= 1.0 + 0.07 * std::cos(2.0 * std::numbers::pi * x) * std::cos(std::numbers::pi * y);
  } else {
    // Incisal edge: crown is higher along the arch line than across it.
    h *= 1.0 - 0.12 * y * y;
  }
  return h;
}

}  // namespace

SyntheticJaw generate_synthetic_jaw(const SyntheticJawSpec& spec) {
  spec.validate();
  Rng rng(derive_seed(spec.seed, 0x5a17));
  SyntheticJaw out;
  out.jaw = spec.seed % 2 == 1 ? Jaw::mandible : Jaw::maxillary;
  const bool upper = out.jaw == Jaw::maxillary;

  auto jitter = [&](double value) { return value * (1.0 + spec.shape_jitter * rng.uniform(-1.0, 1.0)); };
  const double arch_width = jitter(upper ? spec.arch_width * 1.06 : spec.arch_width);
  const double arch_depth = jitter(spec.arch_depth);
  const ArchCurve arch = make_arch(0.5 * arch_width, arch_depth);

  // Teeth from the patient's right distal end to the left distal end.
  const int per_side = spec.tooth_count / 2;
  const int right_quadrant = upper ? 1 : 4;
  const int left_quadrant = upper ? 2 : 3;
  const double* widths = upper ? kUpperWidths : kLowerWidths;
  std::vector<Tooth> teeth;
  for (int k = per_side; k >= 1; --k) teeth.push_back({fdi_to_class(right_quadrant * 10 + k), k, 0, 0, 0, 0, true});
  for (int k = 1; k <= per_side; ++k) teeth.push_back({fdi_to_class(left_quadrant * 10 + k), k, 0, 0, 0, 0, true});

  std::vector<double> nominal;
  double total = 0.0;
  for (const Tooth& t : teeth) {
    nominal.push_back(jitter(widths[t.position - 1]));
    total += nominal.back();
  }
  // Teeth fill 90% of the arch, centered, with a small gap between crowns.
  const double fill = 0.9 * arch.length();
  const double scale = fill / total;
  double cursor = 0.5 * (arch.length() - fill);
  for (std::size_t k = 0; k < teeth.size(); ++k) {
    const double w = nominal[k] * scale;
    teeth[k].center = cursor + 0.5 * w;
    teeth[k].half_length = 0.5 * w * 0.93;
    teeth[k].half_width = spec.strip_width * rng.uniform(0.30, 0.36);
    teeth[k].height = rng.uniform(spec.tooth_height_min, spec.tooth_height_max) * (teeth[k].position <= 3 ? 1.1 : 1.0);
    cursor += w;
  }
  if (spec.missing_tooth_count > 0 && rng.uniform() < spec.missing_tooth_probability) {
    for (int m = 0; m < spec.missing_tooth_count; ++m) {
      std::vector<std::size_t> candidates;
      for (std::size_t k = 0; k < teeth.size(); ++k) {
        if (teeth[k].present) candidates.push_back(k);
      }
      teeth[candidates[rng.index(candidates.size())]].present = false;
    }
  }

  const double angle = spec.max_rotation_deg * std::numbers::pi / 180.0 * rng.uniform(-1.0, 1.0);
  const Eigen::Matrix2d rot = Eigen::Rotation2Dd(angle).toRotationMatrix();

  const int nu = spec.resolution_along;
  const int nv = spec.resolution_across;
  std::vector<Vec3> vertices;
  // Tallest crown over each vertex (class id, crown height above the gum).
  std::vector<std::pair<int, double>> crown;
  vertices.reserve(static_cast<std::size_t>(nu * nv));
  crown.reserve(static_cast<std::size_t>(nu * nv));
  for (int i = 0; i < nu; ++i) {
    const double s = arch.length() * i / (nu - 1);
    const double t = arch.t_at(s);
    const Eigen::Vector2d c = arch.point(t);
    const Eigen::Vector2d tan = arch.tangent(t);
    const Eigen::Vector2d normal(-tan.y(), tan.x());
    for (int j = 0; j < nv; ++j) {
      const double w = (static_cast<double>(j) / (nv - 1) - 0.5) * spec.strip_width;
      const double across = std::cos(std::numbers::pi * w / spec.strip_width);
      std::pair<int, double> top{kGingivaClass, 0.0};
      for (const Tooth& tooth : teeth) {
        if (!tooth.present) continue;
        const double ds = s - tooth.center;
        if (std::abs(ds) >= tooth.half_length) continue;
        const double h = crown_height(tooth, ds, w);
        if (h > top.second) top = {tooth.class_id, h};
      }
      const double z = spec.gum_height * across * across + top.second;
      const Eigen::Vector2d xy = rot * (c + w * normal);
      Vec3 p(xy.x(), xy.y(), z);
      if (spec.vertex_noise > 0) p += spec.vertex_noise * Vec3(rng.normal(), rng.normal(), rng.normal());
      vertices.push_back(p);
      crown.push_back(top);
    }
  }

  std::vector<Face> faces;
  faces.reserve(static_cast<std::size_t>(2 * (nu - 1) * (nv - 1)));
  auto vid = [nv](int i, int j) { return static_cast<std::int32_t>(i * nv + j); };
  for (int i = 0; i + 1 < nu; ++i) {
    for (int j = 0; j + 1 < nv; ++j) {
      // Alternate the diagonal so the grid has no preferred direction.
      if ((i + j) % 2 == 0) {
        faces.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
        faces.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
      } else {
        faces.push_back({vid(i, j), vid(i + 1, j), vid(i, j + 1)});
        faces.push_back({vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
      }
    }
  }
  // Orient every face towards +z (the occlusal side).
  {
    const Face& f = faces.front();
    const Vec3 n = (vertices[f[1]] - vertices[f[0]]).cross(vertices[f[2]] - vertices[f[0]]);
    if (n.z() < 0.0) {
      for (Face& face : faces) std::swap(face[1], face[2]);
    }
  }

  // A face belongs to the tooth of its highest crown vertex, so the whole
  // margin wall is tooth and the boundary sits at the foot of the wall.
  std::vector<int> labels(faces.size(), kGingivaClass);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    std::pair<int, double> best{kGingivaClass, 0.0};
    for (std::int32_t v : faces[f]) {
      if (crown[static_cast<std::size_t>(v)].second > best.second) best = crown[static_cast<std::size_t>(v)];
    }
    labels[f] = best.first;
  }

  MeshBuildReport report;
  out.mesh = make_mesh(std::move(vertices), std::move(faces), &report);
  if (!report.dropped_faces.empty()) {
    std::vector<int> kept;
    kept.reserve(out.mesh.face_count());
    for (std::size_t src : out.mesh.source_face) kept.push_back(labels[src]);
    labels = std::move(kept);
  }
  out.labels = std::move(labels);
  return out;
}

}  // namespace tseg
