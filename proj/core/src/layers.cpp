// SPDX-License-Identifier: Apache-2.0
#include "tsegformer/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tsegformer/error.hpp"

namespace tseg::nn {

template <typename T>
Mat<T> linear(const Mat<T>& x, const Mat<T>& w, const Mat<T>& b) {
  Mat<T> y = x * w;
  y.rowwise() += b.row(0);
  return y;
}

template <typename T>
void linear_backward(const Mat<T>& x, const Mat<T>& w, const Mat<T>& dy, Mat<T>& dw, Mat<T>& db, Mat<T>* dx) {
  dw.noalias() += x.transpose() * dy;
  db.row(0) += dy.colwise().sum();
  if (dx) dx->noalias() = dy * w.transpose();
}

template <typename T>
Mat<T> leaky_relu(const Mat<T>& x, const Mat<T>& gate, T slope) {
  return (gate.array() > T(0)).select(x.array(), slope * x.array()).matrix();
}

template <typename T>
Mat<T> leaky_relu_backward(const Mat<T>& dy, const Mat<T>& gate, T slope) {
  return (gate.array() > T(0)).select(dy.array(), slope * dy.array()).matrix();
}

namespace {
template <typename T>
constexpr T kNormEps = T(1e-5);
}

template <typename T>
Mat<T> layer_norm(const Mat<T>& x, const Mat<T>& gain, const Mat<T>& bias, LayerNormCache<T>* cache) {
  const Eigen::Index n = x.rows();
  const T d = static_cast<T>(x.cols());
  Mat<T> xhat(n, x.cols());
  Vec<T> inv_std(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mean = x.row(i).sum() / d;
    const auto centered = x.row(i).array() - mean;
    const T var = centered.square().sum() / d;
    inv_std(i) = T(1) / std::sqrt(var + kNormEps<T>);
    xhat.row(i) = (centered * inv_std(i)).matrix();
  }
  Mat<T> y = (xhat.array().rowwise() * gain.row(0).array()).matrix();
  y.rowwise() += bias.row(0);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
Mat<T> layer_norm_backward(const Mat<T>& dy, const LayerNormCache<T>& cache, const Mat<T>& gain, Mat<T>& dgain,
                           Mat<T>& dbias) {
  dgain.row(0) += (dy.array() * cache.xhat.array()).matrix().colwise().sum();
  dbias.row(0) += dy.colwise().sum();
  const Mat<T> dxhat = (dy.array().rowwise() * gain.row(0).array()).matrix();
  const T d = static_cast<T>(dy.cols());
  Mat<T> dx(dy.rows(), dy.cols());
  for (Eigen::Index i = 0; i < dy.rows(); ++i) {
    const T mean_d = dxhat.row(i).sum() / d;
    const T mean_dx = dxhat.row(i).dot(cache.xhat.row(i)) / d;
    dx.row(i) = cache.inv_std(i) * (dxhat.row(i).array() - mean_d - cache.xhat.row(i).array() * mean_dx).matrix();
  }
  return dx;
}

template <typename T>
IndexMat knn_rows(const Mat<T>& h, int k) {
  const Eigen::Index n = h.rows();
  if (k < 1 || k > n) throw Error(ErrorCode::invalid_argument, "knn_rows: k must lie in [1, rows]");
  IndexMat out(n, k);
  const Vec<T> sq = h.rowwise().squaredNorm();
  constexpr Eigen::Index kBlock = 256;
  // Bounded max-heap of (distance, index); the heap top is the current k-th
  // nearest, so most candidates are rejected with a single comparison.
  using Entry = std::pair<T, std::int32_t>;
  std::vector<Entry> heap;
  heap.reserve(static_cast<std::size_t>(k));
  Mat<T> gram;
  for (Eigen::Index start = 0; start < n; start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, n - start);
    gram.noalias() = h.middleRows(start, rows) * h.transpose();
    for (Eigen::Index r = 0; r < rows; ++r) {
      const Eigen::Index i = start + r;
      heap.clear();
      for (Eigen::Index j = 0; j < n; ++j) {
        const Entry e{sq(i) + sq(j) - T(2) * gram(r, j), static_cast<std::int32_t>(j)};
        if (heap.size() < static_cast<std::size_t>(k)) {
          heap.push_back(e);
          std::push_heap(heap.begin(), heap.end());
        } else if (e < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = e;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      std::sort_heap(heap.begin(), heap.end());
      for (int c = 0; c < k; ++c) out(i, c) = heap[static_cast<std::size_t>(c)].second;
    }
  }
  return out;
}

template <typename T>
Mat<T> edge_conv(const Mat<T>& h, const IndexMat& knn, const Mat<T>& w, const Mat<T>& b, IndexMat* argmax,
                 const IndexMat* frozen_argmax) {
  const Eigen::Index d = h.cols();
  const Eigen::Index n = h.rows();
  const Mat<T> w_center = w.topRows(d) - w.bottomRows(d);
  const Mat<T> a = h * w_center;
  const Mat<T> nb = h * w.bottomRows(d);
  const Eigen::Index out_dim = w.cols();
  Mat<T> pre(n, out_dim);
  IndexMat arg(n, out_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < out_dim; ++c) {
      std::int32_t best;
      if (frozen_argmax) {
        best = (*frozen_argmax)(i, c);
      } else {
        best = knn(i, 0);
        T best_v = nb(best, c);
        for (Eigen::Index m = 1; m < knn.cols(); ++m) {
          const std::int32_t j = knn(i, m);
          if (nb(j, c) > best_v) {
            best_v = nb(j, c);
            best = j;
          }
        }
      }
      arg(i, c) = best;
      pre(i, c) = a(i, c) + b(0, c) + nb(best, c);
    }
  }
  if (argmax) *argmax = std::move(arg);
  return pre;
}

template <typename T>
Mat<T> edge_conv_backward(const Mat<T>& h, const IndexMat& argmax, const Mat<T>& w, const Mat<T>& dpre, Mat<T>& dw,
                          Mat<T>& db) {
  const Eigen::Index d = h.cols();
  Mat<T> dnb = Mat<T>::Zero(dpre.rows(), dpre.cols());
  for (Eigen::Index i = 0; i < dpre.rows(); ++i) {
    for (Eigen::Index c = 0; c < dpre.cols(); ++c) dnb(argmax(i, c), c) += dpre(i, c);
  }
  db.row(0) += dpre.colwise().sum();
  const Mat<T> ht_da = h.transpose() * dpre;
  const Mat<T> ht_dnb = h.transpose() * dnb;
  dw.topRows(d) += ht_da;
  dw.bottomRows(d) += ht_dnb - ht_da;
  const Mat<T> w_center = w.topRows(d) - w.bottomRows(d);
  Mat<T> dh = dpre * w_center.transpose();
  dh.noalias() += dnb * w.bottomRows(d).transpose();
  return dh;
}

template <typename T>
Mat<T> softmax_rows(const Mat<T>& logits) {
  Mat<T> p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const T m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

template <typename T>
Mat<T> self_attention(const Mat<T>& x, const Mat<T>& wq, const Mat<T>& wk, const Mat<T>& wv, const Mat<T>& wo,
                      const Mat<T>& bo, int heads, AttentionCache<T>* cache) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = wq.cols();
  if (heads < 1 || d % heads != 0) throw Error(ErrorCode::invalid_argument, "attention width must divide into heads");
  const Eigen::Index dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  Mat<T> q = x * wq;
  Mat<T> k = x * wk;
  Mat<T> v = x * wv;
  Mat<T> o(n, d);
  if (cache) cache->probs.resize(static_cast<std::size_t>(heads));
  for (int hd = 0; hd < heads; ++hd) {
    const auto qh = q.middleCols(hd * dh, dh);
    const auto kh = k.middleCols(hd * dh, dh);
    const auto vh = v.middleCols(hd * dh, dh);
    if (cache) {
      Mat<T> scores = qh * kh.transpose();
      scores *= scale;
      Mat<T> p = softmax_rows<T>(scores);
      o.middleCols(hd * dh, dh).noalias() = p * vh;
      cache->probs[static_cast<std::size_t>(hd)] = std::move(p);
    } else {
      constexpr Eigen::Index kBlock = 512;
      for (Eigen::Index start = 0; start < n; start += kBlock) {
        const Eigen::Index rows = std::min(kBlock, n - start);
        Mat<T> scores = qh.middleRows(start, rows) * kh.transpose();
        scores *= scale;
        const Mat<T> p = softmax_rows<T>(scores);
        o.block(start, hd * dh, rows, dh).noalias() = p * vh;
      }
    }
  }
  Mat<T> y = linear<T>(o, wo, bo);
  if (cache) {
    cache->x = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->o = std::move(o);
  }
  return y;
}

template <typename T>
Mat<T> self_attention_backward(const AttentionCache<T>& cache, const Mat<T>& wq, const Mat<T>& wk, const Mat<T>& wv,
                               const Mat<T>& wo, int heads, const Mat<T>& dy, AttentionGrads<T> grads) {
  const Eigen::Index n = cache.x.rows();
  const Eigen::Index d = wq.cols();
  const Eigen::Index dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  Mat<T> d_o;
  linear_backward<T>(cache.o, wo, dy, grads.wo, grads.bo, &d_o);
  Mat<T> dq(n, d), dk(n, d), dv(n, d);
  for (int hd = 0; hd < heads; ++hd) {
    const Mat<T>& p = cache.probs[static_cast<std::size_t>(hd)];
    const auto doh = d_o.middleCols(hd * dh, dh);
    Mat<T> dp = doh * cache.v.middleCols(hd * dh, dh).transpose();
    dv.middleCols(hd * dh, dh).noalias() = p.transpose() * doh;
    // Softmax Jacobian, row by row: ds = p * (dp - <p, dp>).
    const Vec<T> inner = (p.array() * dp.array()).rowwise().sum();
    Mat<T> ds = (p.array() * (dp.array().colwise() - inner.array())).matrix() * scale;
    dq.middleCols(hd * dh, dh).noalias() = ds * cache.k.middleCols(hd * dh, dh);
    dk.middleCols(hd * dh, dh).noalias() = ds.transpose() * cache.q.middleCols(hd * dh, dh);
  }
  grads.wq.noalias() += cache.x.transpose() * dq;
  grads.wk.noalias() += cache.x.transpose() * dk;
  grads.wv.noalias() += cache.x.transpose() * dv;
  Mat<T> dx = dq * wq.transpose();
  dx.noalias() += dk * wk.transpose();
  dx.noalias() += dv * wv.transpose();
  return dx;
}

#define TSEG_INSTANTIATE_LAYERS(T)                                                                          \
  template Mat<T> linear<T>(const Mat<T>&, const Mat<T>&, const Mat<T>&);                                   \
  template void linear_backward<T>(const Mat<T>&, const Mat<T>&, const Mat<T>&, Mat<T>&, Mat<T>&, Mat<T>*); \
  template Mat<T> leaky_relu<T>(const Mat<T>&, const Mat<T>&, T);                                           \
  template Mat<T> leaky_relu_backward<T>(const Mat<T>&, const Mat<T>&, T);                                  \
  template Mat<T> layer_norm<T>(const Mat<T>&, const Mat<T>&, const Mat<T>&, LayerNormCache<T>*);           \
  template Mat<T> layer_norm_backward<T>(const Mat<T>&, const LayerNormCache<T>&, const Mat<T>&, Mat<T>&,   \
                                         Mat<T>&);                                                          \
  template IndexMat knn_rows<T>(const Mat<T>&, int);                                                        \
  template Mat<T> edge_conv<T>(const Mat<T>&, const IndexMat&, const Mat<T>&, const Mat<T>&, IndexMat*,     \
                               const IndexMat*);                                                            \
  template Mat<T> edge_conv_backward<T>(const Mat<T>&, const IndexMat&, const Mat<T>&, const Mat<T>&,       \
                                        Mat<T>&, Mat<T>&);                                                  \
  template Mat<T> softmax_rows<T>(const Mat<T>&);                                                           \
  template Mat<T> self_attention<T>(const Mat<T>&, const Mat<T>&, const Mat<T>&, const Mat<T>&,             \
                                    const Mat<T>&, const Mat<T>&, int, AttentionCache<T>*);                 \
  template Mat<T> self_attention_backward<T>(const AttentionCache<T>&, const Mat<T>&, const Mat<T>&,        \
                                             const Mat<T>&, const Mat<T>&, int, const Mat<T>&,              \
                                             AttentionGrads<T>);

TSEG_INSTANTIATE_LAYERS(float)
TSEG_INSTANTIATE_LAYERS(double)

}  // namespace tseg::nn
