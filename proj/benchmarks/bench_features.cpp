// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "gpm/feature_prep.hpp"
#include "gpm/graph_cut.hpp"
#include "gpm/synthetic.hpp"

namespace {

using namespace gpm;

FeatureStack stack_for(int side, int images) {
  SyntheticOptions o;
  o.n_images = images;
  o.width = side;
  o.height = side;
  o.heads = 8;
  o.dim = 40;
  o.n_timesteps = 1;
  o.extra_layers = false;
  o.regions = quadrants_regions;
  return make_synthetic_stack(o);
}

void BM_FitPca(benchmark::State& state) {
  const auto stack = stack_for(512, static_cast<int>(state.range(0)));
  const auto grids = select_features(stack, {});
  for (auto _ : state) benchmark::DoNotOptimize(fit_pca(grids));
}
BENCHMARK(BM_FitPca)->Arg(2)->Arg(5)->Unit(benchmark::kMillisecond);

void BM_Project(benchmark::State& state) {
  const auto stack = stack_for(512, 5);
  const auto grids = select_features(stack, {});
  const auto model = fit_pca(grids);
  for (auto _ : state) benchmark::DoNotOptimize(project(model, grids));
}
BENCHMARK(BM_Project)->Unit(benchmark::kMillisecond);

void BM_Segment(benchmark::State& state) {
  const auto stack = stack_for(512, 3);
  StrokeSet strokes;
  strokes.strokes = {{0, {{40, 40}, {200, 60}}, 8.0}, {1, {{300, 40}, {480, 200}}, 8.0}, {2, {{60, 300}, {200, 480}}, 8.0}};
  for (auto _ : state) benchmark::DoNotOptimize(segment(stack, strokes, {}, {}));
}
BENCHMARK(BM_Segment)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
