// SPDX-License-Identifier: Apache-2.0
#include "tsegformer/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "tsegformer/error.hpp"
#include "tsegformer/io_util.hpp"

namespace tseg {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'T', 'S', 'E', 'G', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  template <typename V>
  void pod(V v) {
    char buf[sizeof(V)];
    std::memcpy(buf, &v, sizeof(V));
    out_.append(buf, sizeof(V));
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void raw(const void* p, std::size_t n) { out_.append(static_cast<const char*>(p), n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(const std::string& bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  template <typename V>
  V pod() {
    need(sizeof(V));
    V v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(V));
    pos_ += sizeof(V);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw Error(ErrorCode::parse, origin_ + ": truncated checkpoint");
  }
  const std::string& bytes_;
  const std::string& origin_;
  std::size_t pos_ = 0;
};

void write_tensor(Writer& w, const std::string& name, const nn::Mat<float>& m) {
  w.str(name);
  w.pod<std::uint32_t>(2);
  w.pod<std::uint64_t>(static_cast<std::uint64_t>(m.rows()));
  w.pod<std::uint64_t>(static_cast<std::uint64_t>(m.cols()));
  w.raw(m.data(), static_cast<std::size_t>(m.size()) * sizeof(float));
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.str(ck.params.config.to_json());
  w.pod<std::uint64_t>(ck.params.rng_seed);
  w.str(ck.metadata);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(ck.params.tensors.size() + ck.state.size()));
  for (std::size_t i = 0; i < ck.params.tensors.size(); ++i) {
    write_tensor(w, "param/" + ck.params.tensors.name(i), ck.params.tensors[i]);
  }
  for (std::size_t i = 0; i < ck.state.size(); ++i) write_tensor(w, "state/" + ck.state.name(i), ck.state[i]);
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes, const std::string& origin) {
  Reader r(bytes, origin);
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw Error(ErrorCode::parse, origin + ": not a checkpoint file");
  const auto version = r.pod<std::uint32_t>();
  if (version == 0 || version > kCheckpointVersion) {
    throw Error(ErrorCode::parse, origin + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  ck.params.config = NetworkConfig::from_json(r.str());
  ck.params.rng_seed = r.pod<std::uint64_t>();
  ck.metadata = r.str();
  const auto count = r.pod<std::uint32_t>();
  for (std::uint32_t t = 0; t < count; ++t) {
    const std::string name = r.str();
    const auto ndim = r.pod<std::uint32_t>();
    if (ndim == 0 || ndim > 2) throw Error(ErrorCode::parse, origin + ": tensor '" + name + "' has unsupported rank");
    std::uint64_t dims[2] = {1, 1};
    for (std::uint32_t k = 0; k < ndim; ++k) dims[2 - ndim + k] = r.pod<std::uint64_t>();
    if (dims[0] > (1u << 30) || dims[1] > (1u << 30)) throw Error(ErrorCode::parse, origin + ": tensor too large");
    nn::Mat<float> m(static_cast<Eigen::Index>(dims[0]), static_cast<Eigen::Index>(dims[1]));
    r.raw(m.data(), static_cast<std::size_t>(m.size()) * sizeof(float));
    if (name.rfind("param/", 0) == 0) {
      ck.params.tensors.add(name.substr(6), std::move(m));
    } else if (name.rfind("state/", 0) == 0) {
      ck.state.add(name.substr(6), std::move(m));
    }
  }
  if (!r.done()) throw Error(ErrorCode::parse, origin + ": trailing bytes after checkpoint payload");
  audit_shapes(ck.params);
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  atomic_write(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_text_file(path), path.string());
}

std::string checkpoint_id(const NetworkParams<float>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  auto mix = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::string cfg = params.config.to_json();
  mix(cfg.data(), cfg.size());
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    mix(params.tensors.name(i).data(), params.tensors.name(i).size());
    mix(params.tensors[i].data(), static_cast<std::size_t>(params.tensors[i].size()) * sizeof(float));
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace tseg
