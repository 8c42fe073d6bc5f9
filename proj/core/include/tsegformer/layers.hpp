// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace tseg::nn {

/// Activations are stored one point per row.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
using IndexMat = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// y = x w + b, with w stored [in, out] and b stored [1, out].
template <typename T>
Mat<T> linear(const Mat<T>& x, const Mat<T>& w, const Mat<T>& b);

/// Accumulates into dw/db; writes dx when non-null.
template <typename T>
void linear_backward(const Mat<T>& x, const Mat<T>& w, const Mat<T>& dy, Mat<T>& dw, Mat<T>& db,
                     Mat<T>* dx);

/// The sign pattern comes from `gate` (normally x itself; a stored
/// pre-activation when replaying a frozen forward).
template <typename T>
Mat<T> leaky_relu(const Mat<T>& x, const Mat<T>& gate, T slope);
template <typename T>
Mat<T> leaky_relu_backward(const Mat<T>& dy, const Mat<T>& gate, T slope);

template <typename T>
struct LayerNormCache {
  Mat<T> xhat;
  Vec<T> inv_std;
};

/// Per-row normalization over channels with learned gain and bias ([1, d]).
template <typename T>
Mat<T> layer_norm(const Mat<T>& x, const Mat<T>& gain, const Mat<T>& bias, LayerNormCache<T>* cache);
template <typename T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const LayerNormCache<T>& cache, const Mat<T>& gain,
                           Mat<T>& dgain, Mat<T>& dbias);

/// k nearest rows of `h` (squared Euclidean, the row itself included at
/// distance zero), ordered by (distance, index). Requires k <= rows.
template <typename T>
IndexMat knn_rows(const Mat<T>& h, int k);

/// EdgeConv aggregation before the nonlinearity:
///   pre(i, c) = max_{j in knn(i)} ( [h_i, h_j - h_i] w + b )_c
/// with w stored [2d, out]. Because the subsequent activation is monotone,
/// max-then-activate equals activate-then-max. `argmax` receives the winning
/// neighbor per (i, c); when `frozen_argmax` is given it is used instead of
/// recomputing the maximum.
template <typename T>
Mat<T> edge_conv(const Mat<T>& h, const IndexMat& knn, const Mat<T>& w, const Mat<T>& b, IndexMat* argmax,
                 const IndexMat* frozen_argmax);
template <typename T>
Mat<T> edge_conv_backward(const Mat<T>& h, const IndexMat& argmax, const Mat<T>& w, const Mat<T>& dpre,
                          Mat<T>& dw, Mat<T>& db);

template <typename T>
struct AttentionCache {
  Mat<T> x, q, k, v, o;
  std::vector<Mat<T>> probs;  // one [N, N] row-stochastic matrix per head
};

/// Multi-head scaled dot-product self-attention over all rows, followed by
/// the output projection: returns softmax(q k^T / sqrt(d_h)) v, heads
/// concatenated, times wo plus bo. Without a cache the score matrix is
/// evaluated in row blocks and never materialized in full.
template <typename T>
Mat<T> self_attention(const Mat<T>& x, const Mat<T>& wq, const Mat<T>& wk, const Mat<T>& wv,
                      const Mat<T>& wo, const Mat<T>& bo, int heads, AttentionCache<T>* cache);

template <typename T>
struct AttentionGrads {
  Mat<T>& wq;
  Mat<T>& wk;
  Mat<T>& wv;
  Mat<T>& wo;
  Mat<T>& bo;
};

template <typename T>
Mat<T> self_attention_backward(const AttentionCache<T>& cache, const Mat<T>& wq, const Mat<T>& wk,
                               const Mat<T>& wv, const Mat<T>& wo, int heads, const Mat<T>& dy,
                               AttentionGrads<T> grads);

/// Row-wise softmax.
template <typename T>
Mat<T> softmax_rows(const Mat<T>& logits);

}  // namespace tseg::nn
