// SPDX-License-Identifier: Apache-2.0
#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>

#include "tsegformer/error.hpp"
#include "tsegformer/training.hpp"

namespace tseg {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

struct ValueParser {
  const std::string& origin;
  int line;
  const std::string& key;

  [[noreturn]] void fail(const std::string& value, const char* expected) const {
    throw Error(ErrorCode::parse, origin + ":" + std::to_string(line) + ": " + key + ": expected " + expected +
                                      ", got '" + value + "'");
  }
  template <typename I>
  I integer(const std::string& v) const {
    I out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) fail(v, "an integer");
    return out;
  }
  double real(const std::string& v) const {
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) fail(v, "a number");
      return d;
    } catch (const std::logic_error&) {
      fail(v, "a number");
    }
  }
  bool boolean(const std::string& v) const {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    fail(v, "true or false");
  }
  std::vector<int> int_list(const std::string& v) const {
    std::vector<int> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(integer<int>(item));
    }
    return out;
  }
};

std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& TrainConfig::keys() {
  static const std::vector<std::string> k = {
      "epochs", "batch_size", "learning_rate", "min_learning_rate", "seed", "points", "checkpoint_every", "threads",
      "train_data", "val_data", "out_dir", "omega_geo", "omega_aux", "gamma", "hard_ratio", "ranking_signal",
      "augment", "augment_rotation_deg", "augment_translation", "augment_jitter", "network.preset",
      "network.embed_dim", "network.point_dim", "network.category_dim", "network.k_nn", "network.n_heads",
      "network.n_layers", "network.head_hidden", "network.dropout", "network.leaky_slope"};
  return k;
}

void TrainConfig::apply(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::parse, origin + ":" + std::to_string(line) + ": expected 'key = value'");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const ValueParser p{origin, line, key};
    if (key == "epochs") epochs = p.integer<int>(value);
    else if (key == "batch_size") batch_size = p.integer<int>(value);
    else if (key == "learning_rate") learning_rate = p.real(value);
    else if (key == "min_learning_rate") min_learning_rate = p.real(value);
    else if (key == "seed") seed = p.integer<std::uint64_t>(value);
    else if (key == "points") points = p.integer<int>(value);
    else if (key == "checkpoint_every") checkpoint_every = p.integer<int>(value);
    else if (key == "threads") threads = p.integer<int>(value);
    else if (key == "train_data") train_data = value;
    else if (key == "val_data") val_data = value;
    else if (key == "out_dir") out_dir = value;
    else if (key == "omega_geo") loss.omega_geo = p.real(value);
    else if (key == "omega_aux") loss.omega_aux = p.real(value);
    else if (key == "gamma") loss.gamma = p.real(value);
    else if (key == "hard_ratio") loss.r = p.real(value);
    else if (key == "ranking_signal") loss.ranking = parse_ranking_signal(value);
    else if (key == "augment") augment = p.boolean(value);
    else if (key == "augment_rotation_deg") augmentation.rotation_deg = p.real(value);
    else if (key == "augment_translation") augmentation.translation = p.real(value);
    else if (key == "augment_jitter") augmentation.jitter = p.real(value);
    else if (key == "network.preset") {
      if (value == "tiny") network = NetworkConfig::tiny();
      else if (value == "default") network = NetworkConfig{};
      else p.fail(value, "tiny or default");
    }
    else if (key == "network.embed_dim") network.embed_dim = p.integer<int>(value);
    else if (key == "network.point_dim") network.point_dim = p.integer<int>(value);
    else if (key == "network.category_dim") network.category_dim = p.integer<int>(value);
    else if (key == "network.k_nn") network.k_nn = p.integer<int>(value);
    else if (key == "network.n_heads") network.n_heads = p.integer<int>(value);
    else if (key == "network.n_layers") network.n_layers = p.integer<int>(value);
    else if (key == "network.head_hidden") network.head_hidden = p.int_list(value);
    else if (key == "network.dropout") network.dropout = p.real(value);
    else if (key == "network.leaky_slope") network.leaky_slope = p.real(value);
    else throw Error(ErrorCode::parse, origin + ":" + std::to_string(line) + ": unknown key '" + key + "'");
  }
}

TrainConfig TrainConfig::parse(const std::string& text, const std::string& origin) {
  TrainConfig c;
  c.apply(text, origin);
  return c;
}

std::string TrainConfig::to_text() const {
  std::string hidden;
  for (std::size_t i = 0; i < network.head_hidden.size(); ++i) {
    hidden += (i ? "," : "") + std::to_string(network.head_hidden[i]);
  }
  const std::vector<std::pair<std::string, std::string>> kv = {
      {"epochs", std::to_string(epochs)},
      {"batch_size", std::to_string(batch_size)},
      {"learning_rate", fmt_real(learning_rate)},
      {"min_learning_rate", fmt_real(min_learning_rate)},
      {"seed", std::to_string(seed)},
      {"points", std::to_string(points)},
      {"checkpoint_every", std::to_string(checkpoint_every)},
      {"threads", std::to_string(threads)},
      {"train_data", train_data.string()},
      {"val_data", val_data.string()},
      {"out_dir", out_dir.string()},
      {"omega_geo", fmt_real(loss.omega_geo)},
      {"omega_aux", fmt_real(loss.omega_aux)},
      {"gamma", fmt_real(loss.gamma)},
      {"hard_ratio", fmt_real(loss.r)},
      {"ranking_signal", to_string(loss.ranking)},
      {"augment", augment ? "true" : "false"},
      {"augment_rotation_deg", fmt_real(augmentation.rotation_deg)},
      {"augment_translation", fmt_real(augmentation.translation)},
      {"augment_jitter", fmt_real(augmentation.jitter)},
      {"network.embed_dim", std::to_string(network.embed_dim)},
      {"network.point_dim", std::to_string(network.point_dim)},
      {"network.category_dim", std::to_string(network.category_dim)},
      {"network.k_nn", std::to_string(network.k_nn)},
      {"network.n_heads", std::to_string(network.n_heads)},
      {"network.n_layers", std::to_string(network.n_layers)},
      {"network.head_hidden", hidden},
      {"network.dropout", fmt_real(network.dropout)},
      {"network.leaky_slope", fmt_real(network.leaky_slope)},
  };
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

void TrainConfig::validate(bool check_paths) const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::invalid_argument, "train config: " + what);
  };
  require(epochs > 0, "epochs must be > 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(learning_rate > 0 && min_learning_rate >= 0 && min_learning_rate <= learning_rate,
          "need 0 <= min_learning_rate <= learning_rate and learning_rate > 0");
  require(points > network.k_nn, "points must exceed network.k_nn");
  require(checkpoint_every >= 0, "checkpoint_every must be >= 0");
  require(threads >= 1, "threads must be >= 1");
  require(augmentation.rotation_deg >= 0 && augmentation.translation >= 0 && augmentation.jitter >= 0,
          "augmentation magnitudes must be >= 0");
  loss.validate();
  network.validate();
  if (check_paths) {
    for (const auto& p : {train_data, val_data}) {
      if (!p.empty() && !std::filesystem::is_directory(p)) throw Error(ErrorCode::io, "path does not exist: " + p.string());
    }
    if (train_data.empty()) throw Error(ErrorCode::invalid_argument, "train config: train_data is required");
  }
}

}  // namespace tseg
