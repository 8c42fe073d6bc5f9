// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "tsegformer/network.hpp"

namespace tseg {

/// Binary checkpoint container, little-endian:
///
///   "TSEGCKPT" | u32 version | u32 n + config JSON | u64 rng_seed
///   | u32 n + metadata JSON | u32 tensor count
///   | per tensor: u32 n + name | u32 ndim | u64 dims[ndim] | f32 payload (row-major)
///
/// Network tensors are stored as "param/<name>", optimizer or other state as
/// "state/<name>". Readers skip tensors with unknown prefixes.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  NetworkParams<float> params;
  /// Free-form JSON object (training progress, provenance).
  std::string metadata = "{}";
  ParamSet<float> state;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& origin = "<memory>");

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Short hex digest of the parameter payload, used as provenance.
std::string checkpoint_id(const NetworkParams<float>& params);

}  // namespace tseg
