// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include "tsegformer/error.hpp"
#include "tsegformer/network.hpp"
#include "tsegformer/rng.hpp"

using namespace tseg;
using nn::Mat;

namespace {

Mat<double> random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Rng rng(seed);
  Mat<double> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

NetworkConfig small_config() {
  NetworkConfig c;
  c.embed_dim = 8;
  c.point_dim = 12;
  c.category_dim = 4;
  c.k_nn = 5;
  c.n_heads = 2;
  c.n_layers = 3;
  c.head_hidden = {10};
  return c;
}

}  // namespace

TEST_CASE("knn includes the row itself and orders by distance then index") {
  Mat<double> h(5, 1);
  h << 0.0, 1.0, 3.0, -1.0, 1.0;
  const nn::IndexMat knn = nn::knn_rows(h, 3);
  CHECK(knn(0, 0) == 0);
  CHECK(knn(0, 1) == 1);  // ties at distance 1 resolved by index
  CHECK(knn(0, 2) == 3);
  CHECK(knn(1, 0) == 1);
  CHECK(knn(1, 1) == 4);
}

TEST_CASE("softmax rows are normalized and stable") {
  Mat<double> x(2, 3);
  x << 1000.0, 1000.0, 1000.0, -5.0, 0.0, 5.0;
  const Mat<double> p = nn::softmax_rows(x);
  CHECK(p(0, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(p.row(1).sum() == doctest::Approx(1.0));
  CHECK(p.allFinite());
}

TEST_CASE("layer norm backward matches finite differences") {
  const Mat<double> x = random_matrix(4, 6, 1);
  const Mat<double> gain = random_matrix(1, 6, 2);
  const Mat<double> bias = random_matrix(1, 6, 3);
  const Mat<double> up = random_matrix(4, 6, 4);
  nn::LayerNormCache<double> cache;
  nn::layer_norm(x, gain, bias, &cache);
  Mat<double> dgain = Mat<double>::Zero(1, 6), dbias = Mat<double>::Zero(1, 6);
  const Mat<double> dx = nn::layer_norm_backward(up, cache, gain, dgain, dbias);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Mat<double> a = x, b = x;
    a.data()[i] += 1e-6;
    b.data()[i] -= 1e-6;
    const double fd = (nn::layer_norm<double>(a, gain, bias, nullptr).cwiseProduct(up).sum() -
                       nn::layer_norm<double>(b, gain, bias, nullptr).cwiseProduct(up).sum()) / 2e-6;
    CHECK(dx.data()[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("blocked attention equals the cached path") {
  const Mat<double> x = random_matrix(300, 8, 5);
  const Mat<double> wq = random_matrix(8, 8, 6), wk = random_matrix(8, 8, 7), wv = random_matrix(8, 8, 8);
  const Mat<double> wo = random_matrix(8, 8, 9), bo = random_matrix(1, 8, 10);
  nn::AttentionCache<double> cache;
  const Mat<double> a = nn::self_attention(x, wq, wk, wv, wo, bo, 2, &cache);
  const Mat<double> b = nn::self_attention<double>(x, wq, wk, wv, wo, bo, 2, nullptr);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE(cache.probs.size() == 2);
  CHECK((cache.probs[0].rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("parameter layout follows the config") {
  const NetworkConfig c = small_config();
  const NetworkParams<double> p = init_params<double>(c, 1);
  const std::vector<TensorShape> layout = parameter_layout(c);
  REQUIRE(p.tensors.size() == layout.size());
  for (std::size_t i = 0; i < layout.size(); ++i) {
    CHECK(p.tensors.name(i) == layout[i].name);
    CHECK(p.tensors[i].rows() == layout[i].rows);
    CHECK(p.tensors[i].cols() == layout[i].cols);
  }
  NetworkConfig deeper = c;
  deeper.n_layers = 5;
  CHECK(parameter_layout(deeper).size() > layout.size());
  CHECK_NOTHROW(audit_shapes(p));

  NetworkParams<double> broken = p;
  broken.tensors[0](0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(audit_shapes(broken), Error);
  broken.config.point_dim = 13;
  CHECK_THROWS_AS(audit_shapes(broken), Error);
}

TEST_CASE("initialization is deterministic in the seed") {
  const NetworkConfig c = small_config();
  const auto a = init_params<float>(c, 9);
  const auto b = init_params<float>(c, 9);
  const auto d = init_params<float>(c, 10);
  CHECK(a.tensors[0] == b.tensors[0]);
  CHECK(a.tensors[0] != d.tensors[0]);
}

TEST_CASE("config validation and json round trip") {
  NetworkConfig c = small_config();
  CHECK(NetworkConfig::from_json(c.to_json()) == c);
  CHECK_NOTHROW(NetworkConfig::tiny().validate());
  c.embed_dim = 9;  // not divisible by two heads
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("forward shapes, determinism and float/double agreement") {
  const NetworkConfig c = small_config();
  const Network<double> net(c);
  const NetworkParams<double> p = init_params<double>(c, 3);
  const Mat<double> x = random_matrix(40, 8, 11);
  const NetworkOutput<double> y = net.forward(p, x, Eigen::Vector2d(1, 0));
  CHECK(y.seg_logits.rows() == 40);
  CHECK(y.seg_logits.cols() == 33);
  CHECK(y.aux_logits.cols() == 2);
  CHECK(net.forward(p, x, Eigen::Vector2d(1, 0)).seg_logits == y.seg_logits);
  CHECK(net.forward(p, x, Eigen::Vector2d(0, 1)).seg_logits != y.seg_logits);

  const Network<float> netf(c);
  const NetworkOutput<float> yf = netf.forward(p.cast<float>(), x.cast<float>(), Eigen::Vector2d(1, 0));
  CHECK((yf.seg_logits.cast<double>() - y.seg_logits).cwiseAbs().maxCoeff() < 1e-4);

  CHECK_THROWS_AS(net.forward(p, random_matrix(4, 8, 1), Eigen::Vector2d(1, 0)), Error);
}

TEST_CASE("dropout is active only in training and replayable") {
  NetworkConfig c = small_config();
  c.dropout = 0.5;
  const Network<double> net(c);
  const NetworkParams<double> p = init_params<double>(c, 4);
  const Mat<double> x = random_matrix(30, 8, 12);
  ForwardOptions<double> train;
  train.training = true;
  train.dropout_seed = 1;
  ForwardCache<double> cache;
  const NetworkOutput<double> a = net.forward(p, x, Eigen::Vector2d(1, 0), &cache, train);
  CHECK(a.seg_logits != net.forward(p, x, Eigen::Vector2d(1, 0)).seg_logits);
  train.frozen = &cache;
  CHECK(net.forward(p, x, Eigen::Vector2d(1, 0), nullptr, train).seg_logits == a.seg_logits);
}
