// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tseg {

std::string read_text_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partially written artifact.
void atomic_write(const std::filesystem::path& path, std::string_view contents);

/// Per-face label sidecar: one integer per line, line k = face k.
std::vector<int> read_labels(const std::filesystem::path& path);
std::string format_labels(const std::vector<int>& labels);
void write_labels(const std::filesystem::path& path, const std::vector<int>& labels);

}  // namespace tseg
