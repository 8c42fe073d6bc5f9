// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tsegformer/geometry.hpp"
#include "tsegformer/mesh.hpp"
#include "tsegformer/synthetic.hpp"

namespace tseg {

/// Dataset directory layout:
///
///   <root>/meta.json           {"samples": [{"stem": "jaw_000", "mesh": "jaw_000.obj", "jaw": "mandible"}, ...]}
///   <root>/<stem>.obj|ply|stl  mesh
///   <root>/<stem>.labels       one class id per face, in file order
struct DatasetEntry {
  std::string stem;
  std::filesystem::path mesh_path;
  std::filesystem::path labels_path;
  Jaw jaw = Jaw::maxillary;
};

/// Throws Error(io/parse/validation) when meta.json is missing or malformed or
/// a listed file does not exist.
std::vector<DatasetEntry> read_dataset_index(const std::filesystem::path& root);

/// A loaded sample with full-resolution features. Labels follow the mesh after
/// degenerate faces were dropped.
struct Sample {
  std::string stem;
  TriMesh mesh;
  std::vector<int> labels;
  Jaw jaw = Jaw::maxillary;
  FeatureCloud cloud;
};

Sample load_sample(const DatasetEntry& entry);
std::vector<Sample> load_dataset(const std::filesystem::path& root);

/// Builds features for an in-memory mesh (used for synthetic data and tests).
Sample make_sample(std::string stem, TriMesh mesh, std::vector<int> labels, Jaw jaw);

/// Seed of the i-th synthetic sample. Parity follows i so that consecutive
/// samples alternate between maxillary and mandible.
std::uint64_t synthetic_sample_seed(std::uint64_t base_seed, std::size_t i);

/// Writes `count` synthetic jaws plus meta.json. Output bytes depend only on
/// the arguments.
void write_synthetic_dataset(const std::filesystem::path& root, std::size_t count, const SyntheticJawSpec& base,
                             std::uint64_t seed, std::size_t first_index = 0);

/// In-memory equivalent of write_synthetic_dataset().
std::vector<Sample> synthetic_samples(std::size_t count, const SyntheticJawSpec& base, std::uint64_t seed,
                                      std::size_t first_index = 0);

}  // namespace tseg
