// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "tsegformer/layers.hpp"

namespace tseg {

/// Architecture hyperparameters. The global feature width is derived:
/// category_dim + 2 * point_dim (category embedding, max pool, mean pool).
struct NetworkConfig {
  int in_dim = 8;
  int embed_dim = 128;     // width of the point embedding output
  int point_dim = 256;     // encoder output width
  int category_dim = 64;   // width of the linear jaw-category embedding
  int k_nn = 20;           // EdgeConv neighbors, self included
  int n_heads = 4;
  int n_layers = 4;        // stacked self-attention layers
  int n_classes = 33;
  int n_aux = 2;
  std::vector<int> head_hidden{256, 128};
  double dropout = 0.1;
  double leaky_slope = 0.2;

  int global_dim() const { return category_dim + 2 * point_dim; }
  int head_input_dim() const { return point_dim + global_dim(); }

  /// Throws Error(invalid_argument) on inconsistent values.
  void validate() const;

  /// Small widths used for desk-scale training and the test suites.
  static NetworkConfig tiny();

  std::string to_json() const;
  static NetworkConfig from_json(const std::string& text);

  bool operator==(const NetworkConfig&) const = default;
};

struct TensorShape {
  std::string name;
  int rows = 0;
  int cols = 0;
};

/// Ordered collection of named row-major tensors.
template <typename T>
class ParamSet {
 public:
  void add(std::string name, nn::Mat<T> value);

  std::size_t size() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return tensors_[i].first; }
  nn::Mat<T>& operator[](std::size_t i) { return tensors_[i].second; }
  const nn::Mat<T>& operator[](std::size_t i) const { return tensors_[i].second; }

  /// Throws if absent.
  nn::Mat<T>& at(std::string_view name);
  const nn::Mat<T>& at(std::string_view name) const;
  bool contains(std::string_view name) const { return index_.find(std::string(name)) != index_.end(); }

  ParamSet zeros_like() const;
  void set_zero();
  std::size_t scalar_count() const;
  bool all_finite() const;

  template <typename U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& [n, v] : tensors_) out.add(n, v.template cast<U>());
    return out;
  }

 private:
  std::vector<std::pair<std::string, nn::Mat<T>>> tensors_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

template <typename T>
struct NetworkParams {
  NetworkConfig config;
  std::uint64_t rng_seed = 0;
  ParamSet<T> tensors;

  template <typename U>
  NetworkParams<U> cast() const {
    return NetworkParams<U>{config, rng_seed, tensors.template cast<U>()};
  }
};

/// Every tensor of the network for `config`, in a fixed order.
std::vector<TensorShape> parameter_layout(const NetworkConfig& config);

/// Uniform fan-in initialization: weights and biases in +-1/sqrt(fan_in),
/// normalization gains 1 and offsets 0.
template <typename T>
NetworkParams<T> init_params(const NetworkConfig& config, std::uint64_t seed);

/// Confirms that names and shapes match parameter_layout(config) and that every
/// value is finite. Throws Error(validation) describing the first problem.
template <typename T>
void audit_shapes(const NetworkParams<T>& params);

template <typename T>
struct EdgeConvCache {
  nn::Mat<T> input;
  nn::IndexMat knn;
  nn::IndexMat argmax;
  nn::Mat<T> pre;
  nn::LayerNormCache<T> norm;
};

template <typename T>
struct EncoderLayerCache {
  nn::AttentionCache<T> attention;
  nn::Mat<T> residual;  // input + attention output, before normalization
  nn::LayerNormCache<T> norm;
};

template <typename T>
struct HeadCache {
  std::vector<nn::Mat<T>> input;    // input of each linear layer after the first
  std::vector<nn::Mat<T>> pre;      // pre-activation of each hidden layer
  std::vector<nn::Mat<T>> dropout;  // scaled keep masks (empty when inactive)
};

/// Activations and discrete decisions (neighbor lists, max-pool winners,
/// activation signs, dropout masks) recorded by a forward pass.
template <typename T>
struct ForwardCache {
  nn::Mat<T> input;
  nn::Mat<T> category;  // [1, 2]
  nn::Mat<T> embed_pre[2];
  nn::Mat<T> embed_out[2];
  EdgeConvCache<T> edge[2];
  nn::Mat<T> h_pe;
  std::vector<EncoderLayerCache<T>> layers;
  std::vector<nn::Mat<T>> layer_out;
  nn::Mat<T> fuse_input;
  nn::Mat<T> fuse_pre;
  nn::Mat<T> h_p;
  std::vector<std::int32_t> max_pool_arg;
  nn::Mat<T> h_g;
  HeadCache<T> seg;
  HeadCache<T> aux;
};

template <typename T>
struct ForwardOptions {
  /// Enables dropout.
  bool training = false;
  std::uint64_t dropout_seed = 0;
  /// Replays the discrete decisions of an earlier pass instead of recomputing
  /// them. The forward map is then smooth in the parameters, which is what a
  /// finite-difference check needs.
  const ForwardCache<T>* frozen = nullptr;
};

template <typename T>
struct NetworkOutput {
  nn::Mat<T> seg_logits;  // [N, n_classes]
  nn::Mat<T> aux_logits;  // [N, n_aux]
};

/// Point embedding (two linear layers, two EdgeConv layers), self-attention
/// encoder with fused layer outputs, category-conditioned global feature and
/// the two per-point heads.
template <typename T>
class Network {
 public:
  using Mat = nn::Mat<T>;

  explicit Network(NetworkConfig config);

  const NetworkConfig& config() const { return config_; }

  /// [N, in_dim] -> [N, embed_dim]. Throws if N < k_nn.
  Mat point_embed(const NetworkParams<T>& params, const Mat& features, ForwardCache<T>* cache = nullptr,
                  const ForwardOptions<T>& options = {}) const;

  /// [N, embed_dim] -> [N, point_dim].
  Mat encode(const NetworkParams<T>& params, const Mat& h_pe, ForwardCache<T>* cache = nullptr,
             const ForwardOptions<T>& options = {}) const;

  /// Concatenation of the category embedding, column max and column mean of
  /// h_p, as a [1, global_dim] row. `category` must be one-hot of length 2.
  Mat global_feature(const NetworkParams<T>& params, const Mat& h_p, const Eigen::Vector2d& category,
                     ForwardCache<T>* cache = nullptr, const ForwardOptions<T>& options = {}) const;

  NetworkOutput<T> forward(const NetworkParams<T>& params, const Mat& features, const Eigen::Vector2d& category,
                           ForwardCache<T>* cache = nullptr, const ForwardOptions<T>& options = {}) const;

  /// Gradients of every parameter given upstream gradients on both logit
  /// matrices. `cache` must come from forward() on the same parameters.
  ParamSet<T> backward(const NetworkParams<T>& params, const ForwardCache<T>& cache, const Mat& d_seg,
                       const Mat& d_aux) const;

 private:
  Mat run_head(const NetworkParams<T>& params, const std::string& prefix, const Mat& h_p, const Mat& h_g,
               HeadCache<T>* cache, const HeadCache<T>* frozen, const ForwardOptions<T>& options,
               std::uint64_t stream) const;
  void head_backward(const NetworkParams<T>& params, const std::string& prefix, const Mat& h_p, const Mat& h_g,
                     const HeadCache<T>& cache, const Mat& d_logits, ParamSet<T>& grads, Mat& d_hp,
                     Mat& d_hg) const;

  NetworkConfig config_;
};

}  // namespace tseg
