// SPDX-License-Identifier: Apache-2.0
// Microbenchmarks for the geometry pipeline and the network forward pass.

#include <benchmark/benchmark.h>

#include "tsegformer/geometry.hpp"
#include "tsegformer/inference.hpp"
#include "tsegformer/network.hpp"
#include "tsegformer/synthetic.hpp"

namespace {

const tseg::SyntheticJaw& jaw() {
  static const tseg::SyntheticJaw j = [] {
    tseg::SyntheticJawSpec spec;
    spec.seed = 2;
    return tseg::generate_synthetic_jaw(spec);
  }();
  return j;
}

void BM_Adjacency(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(tseg::build_adjacency(jaw().mesh));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(jaw().mesh.face_count()));
}
BENCHMARK(BM_Adjacency)->Unit(benchmark::kMillisecond);

void BM_PointCurvature(benchmark::State& state) {
  const tseg::FaceAdjacency adj = tseg::build_adjacency(jaw().mesh);
  for (auto _ : state) benchmark::DoNotOptimize(tseg::point_curvature(jaw().mesh, adj));
}
BENCHMARK(BM_PointCurvature)->Unit(benchmark::kMillisecond);

void BM_GaussianCurvature(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(tseg::gaussian_curvature(jaw().mesh));
}
BENCHMARK(BM_GaussianCurvature)->Unit(benchmark::kMillisecond);

void BM_MeanCurvature(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(tseg::mean_curvature(jaw().mesh));
}
BENCHMARK(BM_MeanCurvature)->Unit(benchmark::kMillisecond);

void BM_Features(benchmark::State& state) {
  const tseg::FaceAdjacency adj = tseg::build_adjacency(jaw().mesh);
  for (auto _ : state) benchmark::DoNotOptimize(tseg::build_features(jaw().mesh, adj, jaw().jaw));
}
BENCHMARK(BM_Features)->Unit(benchmark::kMillisecond);

// Forward pass of the tiny network on N points, evaluation mode.
void BM_ForwardTiny(benchmark::State& state) {
  const tseg::NetworkConfig config = tseg::NetworkConfig::tiny();
  const tseg::Network<float> net(config);
  const auto params = tseg::init_params<float>(config, 1);
  const tseg::FeatureCloud full = tseg::build_features(jaw().mesh, tseg::build_adjacency(jaw().mesh), jaw().jaw);
  const tseg::FeatureCloud cloud = tseg::downsample(full, static_cast<std::size_t>(state.range(0)), 3);
  const tseg::nn::Mat<float> x = cloud.features.cast<float>();
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(params, x, cloud.category()));
}
BENCHMARK(BM_ForwardTiny)->Arg(512)->Arg(2048)->Unit(benchmark::kMillisecond);

// Forward plus backward, the unit of work of one training item.
void BM_ForwardBackwardTiny(benchmark::State& state) {
  const tseg::NetworkConfig config = tseg::NetworkConfig::tiny();
  const tseg::Network<float> net(config);
  const auto params = tseg::init_params<float>(config, 1);
  const tseg::FeatureCloud full = tseg::build_features(jaw().mesh, tseg::build_adjacency(jaw().mesh), jaw().jaw);
  const tseg::FeatureCloud cloud = tseg::downsample(full, static_cast<std::size_t>(state.range(0)), 3);
  const tseg::nn::Mat<float> x = cloud.features.cast<float>();
  const tseg::nn::Mat<float> d_seg = tseg::nn::Mat<float>::Constant(x.rows(), config.n_classes, 1e-3f);
  const tseg::nn::Mat<float> d_aux = tseg::nn::Mat<float>::Constant(x.rows(), config.n_aux, 1e-3f);
  for (auto _ : state) {
    tseg::ForwardCache<float> cache;
    net.forward(params, x, cloud.category(), &cache);
    benchmark::DoNotOptimize(net.backward(params, cache, d_seg, d_aux));
  }
}
BENCHMARK(BM_ForwardBackwardTiny)->Arg(512)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
