// SPDX-License-Identifier: Apache-2.0
#include "tsegformer/export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "tsegformer/error.hpp"
#include "tsegformer/io_util.hpp"

namespace tseg {

const std::array<Rgb, kNumClasses>& label_palette() {
  static const std::array<Rgb, kNumClasses> palette = [] {
    std::array<Rgb, kNumClasses> p{};
    p[0] = kGingivaColor;
    // Teeth: evenly spaced hues, with alternate classes darker so neighbors
    // along the arch stay distinguishable.
    for (int c = 1; c < kNumClasses; ++c) {
      const double h = std::fmod((c - 1) * 0.618033988749895, 1.0) * 6.0;
      const double v = c % 2 == 0 ? 0.75 : 0.95;
      const double s = 0.75;
      const int sector = static_cast<int>(h);
      const double f = h - sector;
      const double a = v * (1 - s), b = v * (1 - s * f), d = v * (1 - s * (1 - f));
      double r = v, g = d, bl = a;
      switch (sector) {
        case 0: r = v; g = d; bl = a; break;
        case 1: r = b; g = v; bl = a; break;
        case 2: r = a; g = v; bl = d; break;
        case 3: r = a; g = b; bl = v; break;
        case 4: r = d; g = a; bl = v; break;
        default: r = v; g = a; bl = b; break;
      }
      p[c] = {static_cast<std::uint8_t>(std::lround(255 * r)), static_cast<std::uint8_t>(std::lround(255 * g)),
              static_cast<std::uint8_t>(std::lround(255 * bl))};
    }
    return p;
  }();
  return palette;
}

ExportPaths export_result(const SegmentationResult& result, const TriMesh& mesh, const std::filesystem::path& path) {
  if (result.face_labels.size() != mesh.face_count()) {
    throw Error(ErrorCode::invalid_argument, "result has " + std::to_string(result.face_labels.size()) +
                                                 " labels but the mesh has " + std::to_string(mesh.face_count()) +
                                                 " faces");
  }
  std::filesystem::path base = path;
  base.replace_extension();
  ExportPaths out;
  out.obj = base.string() + ".obj";
  out.mtl = base.string() + ".mtl";
  out.labels = base.string() + ".labels";
  out.aux_labels = base.string() + ".aux.labels";

  std::string mtl;
  char buf[160];
  const auto& palette = label_palette();
  for (int c = 0; c < kNumClasses; ++c) {
    std::snprintf(buf, sizeof buf, "newmtl class_%02d\nKd %.6f %.6f %.6f\n\n", c, palette[c][0] / 255.0,
                  palette[c][1] / 255.0, palette[c][2] / 255.0);
    mtl += buf;
  }

  std::string obj = "mtllib " + out.mtl.filename().string() + "\n";
  for (const Vec3& v : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.6f %.6f %.6f\n", v.x(), v.y(), v.z());
    obj += buf;
  }
  // Group faces by class but keep their relative order within a group.
  for (int c = 0; c < kNumClasses; ++c) {
    bool opened = false;
    for (std::size_t f = 0; f < mesh.face_count(); ++f) {
      if (result.face_labels[f] != c) continue;
      if (!opened) {
        std::snprintf(buf, sizeof buf, "usemtl class_%02d\n", c);
        obj += buf;
        opened = true;
      }
      const Face& face = mesh.faces[f];
      std::snprintf(buf, sizeof buf, "f %d %d %d\n", face[0] + 1, face[1] + 1, face[2] + 1);
      obj += buf;
    }
  }

  atomic_write(out.mtl, mtl);
  atomic_write(out.obj, obj);
  write_labels(out.labels, result.face_labels);
  write_labels(out.aux_labels, result.aux_labels);
  if (!result.face_probs.empty()) {
    out.probs = base.string() + ".probs.csv";
    const std::size_t nc = result.face_probs.size() / result.face_labels.size();
    std::string csv;
    for (std::size_t f = 0; f < result.face_labels.size(); ++f) {
      for (std::size_t c = 0; c < nc; ++c) {
        std::snprintf(buf, sizeof buf, c == 0 ? "%.6g" : ",%.6g", result.face_probs[f * nc + c]);
        csv += buf;
      }
      csv += '\n';
    }
    atomic_write(out.probs, csv);
  }
  return out;
}

std::string format_field_csv(std::span<const double> values) {
  std::string out = "face,value\n";
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g\n", i, values[i]);
    out += buf;
  }
  return out;
}

std::string format_field_obj(const TriMesh& mesh, std::span<const double> face_values, double clip_percentile) {
  if (face_values.size() != mesh.face_count()) throw Error(ErrorCode::invalid_argument, "one value per face is required");
  std::vector<double> vsum(mesh.vertex_count(), 0.0);
  std::vector<double> vw(mesh.vertex_count(), 0.0);
  for (std::size_t f = 0; f < mesh.face_count(); ++f) {
    for (std::int32_t v : mesh.faces[f]) {
      vsum[v] += face_values[f] * mesh.face_area[f];
      vw[v] += mesh.face_area[f];
    }
  }
  std::vector<double> mags(face_values.size());
  for (std::size_t i = 0; i < mags.size(); ++i) mags[i] = std::abs(face_values[i]);
  double scale = 1.0;
  if (!mags.empty()) {
    const auto k = static_cast<std::size_t>(std::clamp(clip_percentile, 0.0, 1.0) * (mags.size() - 1));
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k), mags.end());
    scale = mags[k] > 0 ? mags[k] : 1.0;
  }
  std::string out;
  char buf[160];
  for (std::size_t v = 0; v < mesh.vertex_count(); ++v) {
    const double value = vw[v] > 0 ? vsum[v] / vw[v] : 0.0;
    const double t = std::clamp(value / scale, -1.0, 1.0);
    // Blue for negative, white at zero, red for positive.
    const double r = t < 0 ? 1.0 + t : 1.0;
    const double g = 1.0 - std::abs(t);
    const double b = t > 0 ? 1.0 - t : 1.0;
    const Vec3& p = mesh.vertices[v];
    std::snprintf(buf, sizeof buf, "v %.6f %.6f %.6f %.4f %.4f %.4f\n", p.x(), p.y(), p.z(), r, g, b);
    out += buf;
  }
  for (const Face& f : mesh.faces) {
    std::snprintf(buf, sizeof buf, "f %d %d %d\n", f[0] + 1, f[1] + 1, f[2] + 1);
    out += buf;
  }
  return out;
}

}  // namespace tseg
