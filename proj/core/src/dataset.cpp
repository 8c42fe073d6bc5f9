// SPDX-License-Identifier: Apache-2.0
#include "tsegformer/dataset.hpp"

#include <cstdio>

#include "json.hpp"
#include "tsegformer/error.hpp"
#include "tsegformer/io_util.hpp"
#include "tsegformer/rng.hpp"

namespace tseg {

namespace fs = std::filesystem;

std::vector<DatasetEntry> read_dataset_index(const fs::path& root) {
  const fs::path meta_path = root / "meta.json";
  if (!fs::is_directory(root)) throw Error(ErrorCode::io, "dataset root does not exist: " + root.string());
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text_file(meta_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, meta_path.string() + ": " + e.what());
  }
  if (!meta.is_object() || !meta.contains("samples") || !meta["samples"].is_array()) {
    throw Error(ErrorCode::validation, meta_path.string() + ": expected an object with a \"samples\" array");
  }
  std::vector<DatasetEntry> out;
  for (const auto& item : meta["samples"]) {
    if (!item.is_object() || !item.contains("stem") || !item.contains("jaw")) {
      throw Error(ErrorCode::validation, meta_path.string() + ": every sample needs \"stem\" and \"jaw\"");
    }
    DatasetEntry e;
    e.stem = item["stem"].get<std::string>();
    e.jaw = parse_jaw(item["jaw"].get<std::string>());
    e.mesh_path = root / (item.contains("mesh") ? item["mesh"].get<std::string>() : e.stem + ".obj");
    e.labels_path = root / (e.stem + ".labels");
    for (const fs::path& p : {e.mesh_path, e.labels_path}) {
      if (!fs::exists(p)) throw Error(ErrorCode::io, "dataset file missing: " + p.string());
    }
    out.push_back(std::move(e));
  }
  return out;
}

Sample make_sample(std::string stem, TriMesh mesh, std::vector<int> labels, Jaw jaw) {
  if (labels.size() != mesh.face_count()) {
    throw Error(ErrorCode::validation, stem + ": " + std::to_string(labels.size()) + " labels for " +
                                           std::to_string(mesh.face_count()) + " faces");
  }
  for (int l : labels) {
    if (l < 0 || l >= kNumClasses) throw Error(ErrorCode::validation, stem + ": label out of range: " + std::to_string(l));
  }
  Sample s;
  s.stem = std::move(stem);
  s.jaw = jaw;
  const FaceAdjacency adj = build_adjacency(mesh);
  s.cloud = build_features(mesh, adj, jaw);
  s.mesh = std::move(mesh);
  s.labels = std::move(labels);
  return s;
}

Sample load_sample(const DatasetEntry& entry) {
  TriMesh mesh = load_mesh(entry.mesh_path);
  std::vector<int> raw = read_labels(entry.labels_path);
  // Labels refer to the faces as stored in the file; follow the mesh if it
  // dropped degenerate faces.
  const std::size_t original = mesh.source_face.empty() ? 0 : mesh.source_face.back() + 1;
  std::vector<int> labels;
  if (raw.size() == mesh.face_count()) {
    labels = std::move(raw);
  } else if (raw.size() >= original && original > 0) {
    for (std::size_t src : mesh.source_face) labels.push_back(raw[src]);
  } else {
    throw Error(ErrorCode::validation, entry.labels_path.string() + ": " + std::to_string(raw.size()) +
                                           " labels for " + std::to_string(mesh.face_count()) + " faces");
  }
  return make_sample(entry.stem, std::move(mesh), std::move(labels), entry.jaw);
}

std::vector<Sample> load_dataset(const fs::path& root) {
  std::vector<Sample> out;
  for (const DatasetEntry& e : read_dataset_index(root)) out.push_back(load_sample(e));
  return out;
}

std::uint64_t synthetic_sample_seed(std::uint64_t base_seed, std::size_t i) {
  const std::uint64_t s = derive_seed(base_seed, 0x6a617773, i);
  return (s & ~std::uint64_t{1}) | (i & 1u);
}

namespace {

std::string sample_stem(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "jaw_%04zu", i);
  return buf;
}

}  // namespace

std::vector<Sample> synthetic_samples(std::size_t count, const SyntheticJawSpec& base, std::uint64_t seed,
                                      std::size_t first_index) {
  std::vector<Sample> out;
  for (std::size_t i = first_index; i < first_index + count; ++i) {
    SyntheticJawSpec spec = base;
    spec.seed = synthetic_sample_seed(seed, i);
    SyntheticJaw jaw = generate_synthetic_jaw(spec);
    out.push_back(make_sample(sample_stem(i), std::move(jaw.mesh), std::move(jaw.labels), jaw.jaw));
  }
  return out;
}

void write_synthetic_dataset(const fs::path& root, std::size_t count, const SyntheticJawSpec& base,
                             std::uint64_t seed, std::size_t first_index) {
  nlohmann::json samples = nlohmann::json::array();
  for (std::size_t i = first_index; i < first_index + count; ++i) {
    SyntheticJawSpec spec = base;
    spec.seed = synthetic_sample_seed(seed, i);
    const SyntheticJaw jaw = generate_synthetic_jaw(spec);
    const std::string stem = sample_stem(i);
    save_mesh(jaw.mesh, root / (stem + ".obj"));
    write_labels(root / (stem + ".labels"), jaw.labels);
    samples.push_back({{"stem", stem}, {"mesh", stem + ".obj"}, {"jaw", to_string(jaw.jaw)}});
  }
  nlohmann::json meta;
  meta["samples"] = samples;
  meta["generator"] = {{"seed", seed}, {"tooth_count", base.tooth_count},
                       {"resolution_along", base.resolution_along}, {"resolution_across", base.resolution_across}};
  atomic_write(root / "meta.json", meta.dump(2) + "\n");
}

}  // namespace tseg
