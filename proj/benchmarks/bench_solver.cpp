// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "gpm/graph_cut.hpp"
#include "gpm/maxflow.hpp"

namespace {

using namespace gpm;

ReducedFeatures blob_features(int side, int n_images, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> g;
  ReducedFeatures f;
  f.width = side;
  f.height = side;
  f.components = kPcaComponents;
  for (int i = 0; i < n_images; ++i) {
    std::vector<double> centres(static_cast<std::size_t>(side / 8 + 1) * (side / 8 + 1) * f.components);
    for (auto& c : centres) c = 12 * g(rng);
    std::vector<double> grid(static_cast<std::size_t>(side) * side * f.components);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x)
        for (int c = 0; c < f.components; ++c)
          grid[(static_cast<std::size_t>(y) * side + x) * f.components + c] =
              centres[((y / 8) * (side / 8 + 1) + x / 8) * f.components + c] + 3 * g(rng);
    f.grids.push_back(std::move(grid));
  }
  return f;
}

EnergyModel model_for(int side, int labels) {
  const auto feats = blob_features(side, labels, 7);
  LabelGrid d(side, side, kNoDesignation);
  // One stroked row segment per label.
  for (int l = 0; l < labels; ++l) {
    const int y = (l + 1) * side / (labels + 1);
    for (int x = side / 4; x < 3 * side / 4; ++x) d.at(x, y) = l;
  }
  return build_energy(feats, d, GraphCutParams{}, 0);
}

void BM_AlphaExpansion(benchmark::State& state) {
  const auto model = model_for(static_cast<int>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(solve_alpha_expansion(model));
}
BENCHMARK(BM_AlphaExpansion)->Args({32, 3})->Args({64, 2})->Args({64, 5})->Args({128, 5})->Unit(benchmark::kMillisecond);

void BM_Binary(benchmark::State& state) {
  const auto model = model_for(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(solve_binary(model));
}
BENCHMARK(BM_Binary)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_BuildEnergy(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const auto feats = blob_features(side, 5, 3);
  const LabelGrid d(side, side, kNoDesignation);
  for (auto _ : state) benchmark::DoNotOptimize(build_energy(feats, d, GraphCutParams{}, 0));
}
BENCHMARK(BM_BuildEnergy)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_MaxFlowGrid(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  std::mt19937 rng(11);
  std::uniform_int_distribution<MaxFlowGraph::Cap> cap(1, 1000);
  std::vector<MaxFlowGraph::Cap> caps(static_cast<std::size_t>(side) * side * 4);
  for (auto& c : caps) c = cap(rng);
  for (auto _ : state) {
    MaxFlowGraph g(side * side, 2 * side * side);
    g.add_nodes(side * side);
    std::size_t k = 0;
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const int p = y * side + x;
        g.add_tweights(p, caps[k] % 7 == 0 ? caps[k] : 0, caps[k + 1] % 7 == 0 ? caps[k + 1] : 0);
        if (x + 1 < side) g.add_edge(p, p + 1, caps[k + 2], caps[k + 2]);
        if (y + 1 < side) g.add_edge(p, p + side, caps[k + 3], caps[k + 3]);
        k += 4;
      }
    }
    benchmark::DoNotOptimize(g.maxflow());
  }
}
BENCHMARK(BM_MaxFlowGrid)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
