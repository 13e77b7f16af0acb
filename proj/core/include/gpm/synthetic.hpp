// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>

#include "gpm/tensor_store.hpp"

namespace gpm {

/// Region id of a segmentation-grid cell.
using RegionFn = std::function<int(int x, int y, int grid_w, int grid_h)>;

/// Left / right halves split at grid_w / 2.
int halves_regions(int x, int y, int grid_w, int grid_h);
/// Four quadrants.
int quadrants_regions(int x, int y, int grid_w, int grid_h);

/// Shape and content of a generated stack with region-structured features.
struct SyntheticOptions {
  int n_images = 3;
  int width = 64;  // pixels; segmentation grid is width / 8
  int height = 64;
  int heads = 2;
  int dim = 8;
  int n_timesteps = 2;
  /// Adds a half-resolution middle layer and a decoder layer at the segmentation resolution.
  bool extra_layers = true;
  RegionFn regions = halves_regions;
  /// Distance scale between region feature centres, and within-region noise.
  float center_scale = 40.0f;
  float noise = 0.5f;
  std::uint32_t seed = 1;
};

/// In-memory stack: each image's K has one centre per region plus noise;
/// Q and V are fixed affine transforms of K; pixels are a per-(image, region)
/// colour plus mild texture.
FeatureStack make_synthetic_stack(const SyntheticOptions& options);

/// Writes `stack` to `dir` as manifest.json + PNGs + tensors/*.gpmt. Returns the manifest path.
std::filesystem::path save_stack(const FeatureStack& stack, const std::filesystem::path& dir);

std::filesystem::path write_synthetic_stack(const SyntheticOptions& options,
                                            const std::filesystem::path& dir);

}  // namespace gpm
