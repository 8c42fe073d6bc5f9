// SPDX-License-Identifier: Apache-2.0
#include "tsegformer/io_util.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "tsegformer/error.hpp"

namespace tseg {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::io: return "io_error";
    case ErrorCode::parse: return "parse_error";
    case ErrorCode::validation: return "validation_error";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::numerical: return "numerical_error";
  }
  return "error";
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void atomic_write(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error(ErrorCode::io, "short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::io, "cannot rename onto '" + path.string() + "': " + ec.message());
}

std::vector<int> read_labels(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::vector<int> labels;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + pos, end - pos);
    ++line_no;
    pos = end + 1;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    while (!line.empty() && line.front() == ' ') line.remove_prefix(1);
    if (line.empty()) continue;
    int value = 0;
    auto [ptr, ec] = std::from_chars(line.data(), line.data() + line.size(), value);
    if (ec != std::errc() || ptr != line.data() + line.size()) {
      throw Error(ErrorCode::parse, path.string() + ":" + std::to_string(line_no) +
                                        ": expected one integer label, got '" +
                                        std::string(line) + "'");
    }
    labels.push_back(value);
  }
  return labels;
}

std::string format_labels(const std::vector<int>& labels) {
  std::string out;
  out.reserve(labels.size() * 3);
  for (int l : labels) {
    out += std::to_string(l);
    out += '\n';
  }
  return out;
}

void write_labels(const std::filesystem::path& path, const std::vector<int>& labels) {
  atomic_write(path, format_labels(labels));
}

}  // namespace tseg
