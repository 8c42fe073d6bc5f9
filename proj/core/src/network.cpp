// SPDX-License-Identifier: Apache-2.0
#include "tsegformer/network.hpp"

#include <cmath>

#include <json.hpp>

#include "tsegformer/error.hpp"
#include "tsegformer/rng.hpp"

namespace tseg {

using nn::IndexMat;

void NetworkConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw Error(ErrorCode::invalid_argument, "network config: " + what);
  };
  require(in_dim > 0 && embed_dim > 0 && point_dim > 0 && category_dim > 0, "all widths must be positive");
  require(k_nn >= 1, "k_nn must be >= 1");
  require(n_heads >= 1 && embed_dim % n_heads == 0, "embed_dim must be divisible by n_heads");
  require(n_layers >= 1, "n_layers must be >= 1");
  require(n_classes >= 2 && n_aux >= 2, "heads need at least two classes");
  require(!head_hidden.empty(), "head_hidden must list at least one hidden width");
  for (int h : head_hidden) require(h > 0, "head hidden widths must be positive");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  require(leaky_slope >= 0.0 && leaky_slope < 1.0, "leaky_slope must lie in [0, 1)");
}

NetworkConfig NetworkConfig::tiny() {
  NetworkConfig c;
  c.embed_dim = 32;
  c.point_dim = 64;
  c.category_dim = 16;
  c.k_nn = 12;
  c.n_heads = 4;
  c.n_layers = 4;
  c.head_hidden = {64, 64};
  c.dropout = 0.1;
  return c;
}

std::string NetworkConfig::to_json() const {
  nlohmann::json j;
  j["in_dim"] = in_dim;
  j["embed_dim"] = embed_dim;
  j["point_dim"] = point_dim;
  j["category_dim"] = category_dim;
  j["k_nn"] = k_nn;
  j["n_heads"] = n_heads;
  j["n_layers"] = n_layers;
  j["n_classes"] = n_classes;
  j["n_aux"] = n_aux;
  j["head_hidden"] = head_hidden;
  j["dropout"] = dropout;
  j["leaky_slope"] = leaky_slope;
  return j.dump();
}

NetworkConfig NetworkConfig::from_json(const std::string& text) {
  NetworkConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.in_dim = j.value("in_dim", c.in_dim);
    c.embed_dim = j.at("embed_dim").get<int>();
    c.point_dim = j.at("point_dim").get<int>();
    c.category_dim = j.at("category_dim").get<int>();
    c.k_nn = j.at("k_nn").get<int>();
    c.n_heads = j.at("n_heads").get<int>();
    c.n_layers = j.at("n_layers").get<int>();
    c.n_classes = j.value("n_classes", c.n_classes);
    c.n_aux = j.value("n_aux", c.n_aux);
    c.head_hidden = j.at("head_hidden").get<std::vector<int>>();
    c.dropout = j.value("dropout", c.dropout);
    c.leaky_slope = j.value("leaky_slope", c.leaky_slope);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::parse, std::string("network config: ") + e.what());
  }
  c.validate();
  return c;
}

template <typename T>
void ParamSet<T>::add(std::string name, nn::Mat<T> value) {
  if (index_.count(name)) throw Error(ErrorCode::invalid_argument, "duplicate tensor '" + name + "'");
  index_.emplace(name, tensors_.size());
  tensors_.emplace_back(std::move(name), std::move(value));
}

template <typename T>
nn::Mat<T>& ParamSet<T>::at(std::string_view name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCode::validation, "missing tensor '" + std::string(name) + "'");
  return tensors_[it->second].second;
}

template <typename T>
const nn::Mat<T>& ParamSet<T>::at(std::string_view name) const {
  return const_cast<ParamSet*>(this)->at(name);
}

template <typename T>
ParamSet<T> ParamSet<T>::zeros_like() const {
  ParamSet out;
  for (const auto& [n, v] : tensors_) out.add(n, nn::Mat<T>::Zero(v.rows(), v.cols()));
  return out;
}

template <typename T>
void ParamSet<T>::set_zero() {
  for (auto& t : tensors_) t.second.setZero();
}

template <typename T>
std::size_t ParamSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t.second.size());
  return n;
}

template <typename T>
bool ParamSet<T>::all_finite() const {
  for (const auto& t : tensors_) {
    if (!t.second.allFinite()) return false;
  }
  return true;
}

std::vector<TensorShape> parameter_layout(const NetworkConfig& c) {
  c.validate();
  std::vector<TensorShape> out;
  auto linear = [&](const std::string& p, int in, int o) {
    out.push_back({p + ".weight", in, o});
    out.push_back({p + ".bias", 1, o});
  };
  auto norm = [&](const std::string& p, int d) {
    out.push_back({p + ".gain", 1, d});
    out.push_back({p + ".bias", 1, d});
  };
  linear("embed.linear1", c.in_dim, c.embed_dim);
  linear("embed.linear2", c.embed_dim, c.embed_dim);
  for (int e = 1; e <= 2; ++e) {
    const std::string p = "embed.edgeconv" + std::to_string(e);
    linear(p, 2 * c.embed_dim, c.embed_dim);
    norm(p + ".norm", c.embed_dim);
  }
  for (int l = 0; l < c.n_layers; ++l) {
    const std::string p = "encoder.layer" + std::to_string(l);
    out.push_back({p + ".query", c.embed_dim, c.embed_dim});
    out.push_back({p + ".key", c.embed_dim, c.embed_dim});
    out.push_back({p + ".value", c.embed_dim, c.embed_dim});
    linear(p + ".out", c.embed_dim, c.embed_dim);
    norm(p + ".norm", c.embed_dim);
  }
  linear("encoder.fuse", c.n_layers * c.embed_dim, c.point_dim);
  linear("global.category", 2, c.category_dim);
  for (const auto& [prefix, classes] : {std::pair{"seg_head", c.n_classes}, std::pair{"aux_head", c.n_aux}}) {
    int in = c.head_input_dim();
    for (std::size_t l = 0; l < c.head_hidden.size(); ++l) {
      linear(std::string(prefix) + ".fc" + std::to_string(l), in, c.head_hidden[l]);
      in = c.head_hidden[l];
    }
    linear(std::string(prefix) + ".out", in, classes);
  }
  return out;
}

namespace {
bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}
}  // namespace

template <typename T>
NetworkParams<T> init_params(const NetworkConfig& config, std::uint64_t seed) {
  NetworkParams<T> params;
  params.config = config;
  params.rng_seed = seed;
  Rng rng(seed);
  int fan_in = 1;
  for (const TensorShape& s : parameter_layout(config)) {
    nn::Mat<T> m(s.rows, s.cols);
    const bool is_norm = s.name.find(".norm.") != std::string::npos;
    if (is_norm) {
      m.setConstant(ends_with(s.name, ".gain") ? T(1) : T(0));
    } else {
      // Biases follow their weight and reuse its fan-in.
      if (!ends_with(s.name, ".bias")) fan_in = s.rows;
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(rng.uniform(-bound, bound));
    }
    params.tensors.add(s.name, std::move(m));
  }
  return params;
}

template <typename T>
void audit_shapes(const NetworkParams<T>& params) {
  const auto layout = parameter_layout(params.config);
  if (layout.size() != params.tensors.size()) {
    throw Error(ErrorCode::validation, "expected " + std::to_string(layout.size()) + " tensors, found " +
                                           std::to_string(params.tensors.size()));
  }
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const auto& expect = layout[i];
    const auto& t = params.tensors[i];
    if (params.tensors.name(i) != expect.name || t.rows() != expect.rows || t.cols() != expect.cols) {
      throw Error(ErrorCode::validation, "tensor " + std::to_string(i) + " is '" + params.tensors.name(i) + "' [" +
                                             std::to_string(t.rows()) + "x" + std::to_string(t.cols()) +
                                             "], expected '" + expect.name + "' [" + std::to_string(expect.rows) +
                                             "x" + std::to_string(expect.cols) + "]");
    }
    if (!t.allFinite()) throw Error(ErrorCode::numerical, "tensor '" + expect.name + "' has non-finite values");
  }
}

template <typename T>
Network<T>::Network(NetworkConfig config) : config_(std::move(config)) {
  config_.validate();
}

template <typename T>
typename Network<T>::Mat Network<T>::point_embed(const NetworkParams<T>& params, const Mat& features,
                                                 ForwardCache<T>* cache, const ForwardOptions<T>& options) const {
  if (features.cols() != config_.in_dim) {
    throw Error(ErrorCode::invalid_argument, "point_embed expects " + std::to_string(config_.in_dim) + " columns");
  }
  if (features.rows() < config_.k_nn) {
    throw Error(ErrorCode::invalid_argument, "point cloud has " + std::to_string(features.rows()) +
                                                 " points; EdgeConv needs at least k_nn = " +
                                                 std::to_string(config_.k_nn));
  }
  const auto& P = params.tensors;
  const ForwardCache<T>* frozen = options.frozen;
  const T slope = static_cast<T>(config_.leaky_slope);

  Mat h = features;
  for (int l = 0; l < 2; ++l) {
    const std::string p = "embed.linear" + std::to_string(l + 1);
    Mat pre = nn::linear<T>(h, P.at(p + ".weight"), P.at(p + ".bias"));
    h = nn::leaky_relu<T>(pre, frozen ? frozen->embed_pre[l] : pre, slope);
    if (cache) {
      cache->embed_pre[l] = std::move(pre);
      cache->embed_out[l] = h;
    }
  }
  for (int e = 0; e < 2; ++e) {
    const std::string p = "embed.edgeconv" + std::to_string(e + 1);
    IndexMat knn = frozen ? frozen->edge[e].knn : nn::knn_rows<T>(h, config_.k_nn);
    IndexMat argmax;
    Mat pre = nn::edge_conv<T>(h, knn, P.at(p + ".weight"), P.at(p + ".bias"), &argmax,
                               frozen ? &frozen->edge[e].argmax : nullptr);
    Mat act = nn::leaky_relu<T>(pre, frozen ? frozen->edge[e].pre : pre, slope);
    nn::LayerNormCache<T> norm;
    Mat out = nn::layer_norm<T>(act, P.at(p + ".norm.gain"), P.at(p + ".norm.bias"), cache ? &norm : nullptr);
    if (cache) {
      auto& ec = cache->edge[e];
      ec.input = std::move(h);
      ec.knn = std::move(knn);
      ec.argmax = std::move(argmax);
      ec.pre = std::move(pre);
      ec.norm = std::move(norm);
    }
    h = std::move(out);
  }
  if (cache) {
    cache->input = features;
    cache->h_pe = h;
  }
  return h;
}

template <typename T>
typename Network<T>::Mat Network<T>::encode(const NetworkParams<T>& params, const Mat& h_pe, ForwardCache<T>* cache,
                                            const ForwardOptions<T>& options) const {
  const auto& P = params.tensors;
  const int d = config_.embed_dim;
  Mat fused(h_pe.rows(), static_cast<Eigen::Index>(config_.n_layers) * d);
  if (cache) {
    cache->layers.assign(static_cast<std::size_t>(config_.n_layers), {});
    cache->layer_out.assign(static_cast<std::size_t>(config_.n_layers), {});
  }
  Mat x = h_pe;
  for (int l = 0; l < config_.n_layers; ++l) {
    const std::string p = "encoder.layer" + std::to_string(l);
    EncoderLayerCache<T>* lc = cache ? &cache->layers[static_cast<std::size_t>(l)] : nullptr;
    Mat y = nn::self_attention<T>(x, P.at(p + ".query"), P.at(p + ".key"), P.at(p + ".value"),
                                  P.at(p + ".out.weight"), P.at(p + ".out.bias"), config_.n_heads,
                                  lc ? &lc->attention : nullptr);
    Mat z = x + y;
    Mat out = nn::layer_norm<T>(z, P.at(p + ".norm.gain"), P.at(p + ".norm.bias"), lc ? &lc->norm : nullptr);
    if (lc) {
      lc->residual = std::move(z);
      cache->layer_out[static_cast<std::size_t>(l)] = out;
    }
    fused.middleCols(static_cast<Eigen::Index>(l) * d, d) = out;
    x = std::move(out);
  }
  Mat pre = nn::linear<T>(fused, P.at("encoder.fuse.weight"), P.at("encoder.fuse.bias"));
  Mat h_p = nn::leaky_relu<T>(pre, options.frozen ? options.frozen->fuse_pre : pre,
                              static_cast<T>(config_.leaky_slope));
  if (cache) {
    cache->fuse_input = std::move(fused);
    cache->fuse_pre = std::move(pre);
    cache->h_p = h_p;
  }
  return h_p;
}

template <typename T>
typename Network<T>::Mat Network<T>::global_feature(const NetworkParams<T>& params, const Mat& h_p,
                                                    const Eigen::Vector2d& category, ForwardCache<T>* cache,
                                                    const ForwardOptions<T>& options) const {
  const bool one_hot = (category(0) == 1.0 && category(1) == 0.0) || (category(0) == 0.0 && category(1) == 1.0);
  if (!one_hot) throw Error(ErrorCode::invalid_argument, "category vector must be one-hot of length 2");
  if (h_p.rows() == 0) throw Error(ErrorCode::invalid_argument, "global_feature needs at least one point");
  const auto& P = params.tensors;
  const int dc = config_.category_dim;
  const int dp = config_.point_dim;
  Mat v(1, 2);
  v << static_cast<T>(category(0)), static_cast<T>(category(1));
  Mat h_g(1, config_.global_dim());
  h_g.leftCols(dc) = nn::linear<T>(v, P.at("global.category.weight"), P.at("global.category.bias"));
  std::vector<std::int32_t> arg(static_cast<std::size_t>(dp));
  for (int c = 0; c < dp; ++c) {
    Eigen::Index best = 0;
    if (options.frozen) {
      best = options.frozen->max_pool_arg[static_cast<std::size_t>(c)];
    } else {
      h_p.col(c).maxCoeff(&best);
    }
    arg[static_cast<std::size_t>(c)] = static_cast<std::int32_t>(best);
    h_g(0, dc + c) = h_p(best, c);
  }
  // Fixed-order column sums keep the mean independent of threading.
  h_g.rightCols(dp) = h_p.colwise().sum() / static_cast<T>(h_p.rows());
  if (cache) {
    cache->category = v;
    cache->max_pool_arg = std::move(arg);
    cache->h_g = h_g;
  }
  return h_g;
}

template <typename T>
typename Network<T>::Mat Network<T>::run_head(const NetworkParams<T>& params, const std::string& prefix,
                                              const Mat& h_p, const Mat& h_g, HeadCache<T>* cache,
                                              const HeadCache<T>* frozen, const ForwardOptions<T>& options,
                                              std::uint64_t stream) const {
  const auto& P = params.tensors;
  const int dp = config_.point_dim;
  const T slope = static_cast<T>(config_.leaky_slope);
  const std::size_t hidden = config_.head_hidden.size();
  const bool use_dropout = options.training && config_.dropout > 0.0;
  if (cache) {
    cache->input.assign(hidden, {});
    cache->pre.assign(hidden, {});
    cache->dropout.assign(hidden, {});
  }
  Mat x;
  for (std::size_t l = 0; l < hidden; ++l) {
    const std::string p = prefix + ".fc" + std::to_string(l);
    const Mat& w = P.at(p + ".weight");
    const Mat& b = P.at(p + ".bias");
    Mat pre;
    if (l == 0) {
      // h_a = h_p (+) broadcast(h_g); the h_g block contributes one row shared by all points.
      pre = h_p * w.topRows(dp);
      const Mat shared = h_g * w.bottomRows(w.rows() - dp) + b;
      pre.rowwise() += shared.row(0);
    } else {
      pre = nn::linear<T>(x, w, b);
    }
    Mat act = nn::leaky_relu<T>(pre, frozen ? frozen->pre[l] : pre, slope);
    Mat mask;
    if (frozen) {
      mask = frozen->dropout[l];
    } else if (use_dropout) {
      Rng rng(derive_seed(options.dropout_seed, stream, l));
      const T keep = static_cast<T>(1.0 - config_.dropout);
      mask.resize(act.rows(), act.cols());
      for (Eigen::Index i = 0; i < mask.size(); ++i) {
        mask.data()[i] = rng.uniform() < config_.dropout ? T(0) : T(1) / keep;
      }
    }
    if (mask.size() > 0) act = (act.array() * mask.array()).matrix();
    if (cache) {
      cache->pre[l] = std::move(pre);
      cache->dropout[l] = std::move(mask);
      cache->input[l] = act;
    }
    x = std::move(act);
  }
  return nn::linear<T>(x, P.at(prefix + ".out.weight"), P.at(prefix + ".out.bias"));
}

template <typename T>
NetworkOutput<T> Network<T>::forward(const NetworkParams<T>& params, const Mat& features,
                                     const Eigen::Vector2d& category, ForwardCache<T>* cache,
                                     const ForwardOptions<T>& options) const {
  if (!(params.config == config_)) throw Error(ErrorCode::invalid_argument, "parameters were built for another config");
  const Mat h_pe = point_embed(params, features, cache, options);
  const Mat h_p = encode(params, h_pe, cache, options);
  const Mat h_g = global_feature(params, h_p, category, cache, options);
  NetworkOutput<T> out;
  out.seg_logits = run_head(params, "seg_head", h_p, h_g, cache ? &cache->seg : nullptr,
                            options.frozen ? &options.frozen->seg : nullptr, options, 1);
  out.aux_logits = run_head(params, "aux_head", h_p, h_g, cache ? &cache->aux : nullptr,
                            options.frozen ? &options.frozen->aux : nullptr, options, 2);
  return out;
}

template <typename T>
void Network<T>::head_backward(const NetworkParams<T>& params, const std::string& prefix, const Mat& h_p,
                               const Mat& h_g, const HeadCache<T>& cache, const Mat& d_logits, ParamSet<T>& grads,
                               Mat& d_hp, Mat& d_hg) const {
  const auto& P = params.tensors;
  const int dp = config_.point_dim;
  const T slope = static_cast<T>(config_.leaky_slope);
  const std::size_t hidden = config_.head_hidden.size();
  Mat d;
  nn::linear_backward<T>(cache.input[hidden - 1], P.at(prefix + ".out.weight"), d_logits,
                         grads.at(prefix + ".out.weight"), grads.at(prefix + ".out.bias"), &d);
  for (std::size_t l = hidden; l-- > 0;) {
    const std::string p = prefix + ".fc" + std::to_string(l);
    if (cache.dropout[l].size() > 0) d = (d.array() * cache.dropout[l].array()).matrix();
    const Mat d_pre = nn::leaky_relu_backward<T>(d, cache.pre[l], slope);
    const Mat& w = P.at(p + ".weight");
    if (l > 0) {
      nn::linear_backward<T>(cache.input[l - 1], w, d_pre, grads.at(p + ".weight"), grads.at(p + ".bias"), &d);
    } else {
      Mat& dw = grads.at(p + ".weight");
      const Mat col_sum = d_pre.colwise().sum();
      const Eigen::Index dg = w.rows() - dp;
      dw.topRows(dp).noalias() += h_p.transpose() * d_pre;
      dw.bottomRows(dg).noalias() += h_g.transpose() * col_sum;
      grads.at(p + ".bias") += col_sum;
      d_hp.noalias() += d_pre * w.topRows(dp).transpose();
      d_hg.noalias() += col_sum * w.bottomRows(dg).transpose();
    }
  }
}

template <typename T>
ParamSet<T> Network<T>::backward(const NetworkParams<T>& params, const ForwardCache<T>& cache, const Mat& d_seg,
                                 const Mat& d_aux) const {
  const auto& P = params.tensors;
  ParamSet<T> grads = P.zeros_like();
  const T slope = static_cast<T>(config_.leaky_slope);
  const Eigen::Index n = cache.h_p.rows();
  const int dp = config_.point_dim;
  const int dc = config_.category_dim;
  const int d = config_.embed_dim;

  Mat d_hp = Mat::Zero(n, dp);
  Mat d_hg = Mat::Zero(1, config_.global_dim());
  head_backward(params, "seg_head", cache.h_p, cache.h_g, cache.seg, d_seg, grads, d_hp, d_hg);
  head_backward(params, "aux_head", cache.h_p, cache.h_g, cache.aux, d_aux, grads, d_hp, d_hg);

  // Global feature.
  const Mat d_cat = d_hg.leftCols(dc);
  grads.at("global.category.weight").noalias() += cache.category.transpose() * d_cat;
  grads.at("global.category.bias") += d_cat;
  for (int c = 0; c < dp; ++c) d_hp(cache.max_pool_arg[static_cast<std::size_t>(c)], c) += d_hg(0, dc + c);
  d_hp.rowwise() += d_hg.rightCols(dp).row(0) / static_cast<T>(n);

  // Encoder.
  const Mat d_fuse_pre = nn::leaky_relu_backward<T>(d_hp, cache.fuse_pre, slope);
  Mat d_fused;
  nn::linear_backward<T>(cache.fuse_input, P.at("encoder.fuse.weight"), d_fuse_pre, grads.at("encoder.fuse.weight"),
                         grads.at("encoder.fuse.bias"), &d_fused);
  Mat carry = Mat::Zero(n, d);
  for (int l = config_.n_layers; l-- > 0;) {
    const std::string p = "encoder.layer" + std::to_string(l);
    const auto& lc = cache.layers[static_cast<std::size_t>(l)];
    const Mat d_out = d_fused.middleCols(static_cast<Eigen::Index>(l) * d, d) + carry;
    const Mat d_z = nn::layer_norm_backward<T>(d_out, lc.norm, P.at(p + ".norm.gain"), grads.at(p + ".norm.gain"),
                                               grads.at(p + ".norm.bias"));
    nn::AttentionGrads<T> ag{grads.at(p + ".query"), grads.at(p + ".key"), grads.at(p + ".value"),
                             grads.at(p + ".out.weight"), grads.at(p + ".out.bias")};
    carry = d_z + nn::self_attention_backward<T>(lc.attention, P.at(p + ".query"), P.at(p + ".key"),
                                                 P.at(p + ".value"), P.at(p + ".out.weight"), config_.n_heads, d_z,
                                                 ag);
  }

  // Point embedding.
  Mat dh = std::move(carry);
  for (int e = 1; e >= 0; --e) {
    const std::string p = "embed.edgeconv" + std::to_string(e + 1);
    const auto& ec = cache.edge[e];
    const Mat d_act = nn::layer_norm_backward<T>(dh, ec.norm, P.at(p + ".norm.gain"), grads.at(p + ".norm.gain"),
                                                 grads.at(p + ".norm.bias"));
    const Mat d_pre = nn::leaky_relu_backward<T>(d_act, ec.pre, slope);
    dh = nn::edge_conv_backward<T>(ec.input, ec.argmax, P.at(p + ".weight"), d_pre, grads.at(p + ".weight"),
                                   grads.at(p + ".bias"));
  }
  for (int l = 1; l >= 0; --l) {
    const std::string p = "embed.linear" + std::to_string(l + 1);
    const Mat d_pre = nn::leaky_relu_backward<T>(dh, cache.embed_pre[l], slope);
    const Mat& input = l == 0 ? cache.input : cache.embed_out[0];
    Mat d_in;
    nn::linear_backward<T>(input, P.at(p + ".weight"), d_pre, grads.at(p + ".weight"), grads.at(p + ".bias"),
                           l == 0 ? nullptr : &d_in);
    dh = std::move(d_in);
  }
  return grads;
}

template class ParamSet<float>;
template class ParamSet<double>;
template class Network<float>;
template class Network<double>;
template NetworkParams<float> init_params<float>(const NetworkConfig&, std::uint64_t);
template NetworkParams<double> init_params<double>(const NetworkConfig&, std::uint64_t);
template void audit_shapes<float>(const NetworkParams<float>&);
template void audit_shapes<double>(const NetworkParams<double>&);

}  // namespace tseg
