// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <vector>

#include "gpm/tensor_store.hpp"

namespace gpm {

inline constexpr int kPcaComponents = 10;

enum class TimestepMode { kFinal, kAverageFrom };

struct FeatureSelection {
  Projection source = Projection::kK;
  /// Empty selects the stack's segmentation layer (first encoder layer).
  std::string layer;
  TimestepMode timestep_mode = TimestepMode::kFinal;
  /// Only read for kAverageFrom: average every manifest timestep >= this value.
  int average_from = 0;

  /// Stable textual form, e.g. "K|down_0_attn0|final". Used as a cache key.
  std::string key() const;
  bool operator==(const FeatureSelection&) const = default;
};

/// Raw per-cell feature vectors of one image: (height, width, dim), cell-major.
struct FeatureGrid {
  int width = 0;
  int height = 0;
  int dim = 0;
  std::vector<float> values;

  std::span<const float> cell(int x, int y) const {
    return {values.data() + (static_cast<std::size_t>(y) * width + x) * dim,
            static_cast<std::size_t>(dim)};
  }
  std::span<float> cell(int x, int y) {
    return {values.data() + (static_cast<std::size_t>(y) * width + x) * dim,
            static_cast<std::size_t>(dim)};
  }
};

/// Flattens a (heads, h, w, dim) tensor so each cell holds its heads concatenated.
FeatureGrid flatten_heads(const AttentionTensor& tensor);

std::vector<FeatureGrid> select_features(const FeatureStack& stack, const FeatureSelection& sel);

struct PcaModel {
  Eigen::VectorXd mean;                // D
  Eigen::MatrixXd basis;               // D x k, orthonormal columns
  Eigen::VectorXd explained_variance;  // k, descending
  bool degenerate = false;

  int input_dim() const { return static_cast<int>(mean.size()); }
  int components() const { return static_cast<int>(basis.cols()); }
};

/// Joint PCA over every cell of every grid. Keeps min(10, D) components.
///
/// Each basis vector is sign-normalised so its largest-magnitude entry is
/// positive (first such entry on ties). All-identical input yields a model
/// flagged `degenerate` with zero variance and the leading coordinate axes
/// as basis.
PcaModel fit_pca(std::span<const FeatureGrid> grids);

/// Per-image grids of k-dimensional projected vectors f_i(p).
struct ReducedFeatures {
  int width = 0;
  int height = 0;
  int components = 0;
  std::vector<std::vector<double>> grids;

  int n_images() const { return static_cast<int>(grids.size()); }
  std::span<const double> at(int image, int x, int y) const {
    return {grids[image].data() + (static_cast<std::size_t>(y) * width + x) * components,
            static_cast<std::size_t>(components)};
  }
  std::span<const double> at(int image, std::size_t cell) const {
    return {grids[image].data() + cell * components, static_cast<std::size_t>(components)};
  }
};

ReducedFeatures project(const PcaModel& model, std::span<const FeatureGrid> grids);
Eigen::VectorXd project_one(const PcaModel& model, std::span<const float> x);

/// PCA model persisted as JSON with full double precision, so a cached model
/// reproduces the freshly fitted one exactly.
void save_pca(const std::filesystem::path& path, const PcaModel& model);
PcaModel load_pca(const std::filesystem::path& path);

}  // namespace gpm
