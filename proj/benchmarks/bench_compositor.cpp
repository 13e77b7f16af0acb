// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <random>

#include "gpm/compositor.hpp"
#include "gpm/metrics.hpp"
#include "gpm/synthetic.hpp"

namespace {

using namespace gpm;

LabelGrid quadrant_labels(int side) {
  LabelGrid l(side, side);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) l.at(x, y) = quadrants_regions(x, y, side, side) % 3;
  return l;
}

void BM_CompositeKv(benchmark::State& state) {
  SyntheticOptions o;
  o.width = 512;
  o.height = 512;
  o.heads = 8;
  o.dim = 40;
  o.n_timesteps = 1;
  const auto stack = make_synthetic_stack(o);
  const auto masks = build_masks(quadrant_labels(64), stack.manifest());
  for (auto _ : state) benchmark::DoNotOptimize(composite_kv(stack, masks, "enc0", 0));
}
BENCHMARK(BM_CompositeKv)->Unit(benchmark::kMillisecond);

void BM_Poisson(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  SyntheticOptions o;
  o.width = side;
  o.height = side;
  o.extra_layers = false;
  o.regions = quadrants_regions;
  const auto stack = make_synthetic_stack(o);
  const auto comp = pixel_composite(stack, quadrant_labels(side / 8));
  for (auto _ : state) benchmark::DoNotOptimize(poisson_blend(comp, stack.images(), 0));
}
BENCHMARK(BM_Poisson)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Metrics(benchmark::State& state) {
  SyntheticOptions o;
  o.width = 256;
  o.height = 256;
  o.extra_layers = false;
  o.regions = quadrants_regions;
  const auto stack = make_synthetic_stack(o);
  const auto comp = pixel_composite(stack, quadrant_labels(32));
  for (auto _ : state) benchmark::DoNotOptimize(evaluate(comp.image, stack.images(), comp.fullres_labels));
}
BENCHMARK(BM_Metrics)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
