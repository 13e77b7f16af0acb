// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gpm/feature_prep.hpp"
#include "gpm/image.hpp"
#include "gpm/tensor_store.hpp"

namespace gpm {

struct StrokePoint {
  double x = 0;
  double y = 0;
  bool operator==(const StrokePoint&) const = default;
};

struct Stroke {
  int image_index = 0;
  std::vector<StrokePoint> points;
  double radius = 1.0;
  bool operator==(const Stroke&) const = default;
};

/// Ordered strokes plus the base image. No strokes means "everything from the base".
struct StrokeSet {
  std::vector<Stroke> strokes;
  int base_index = 0;
  bool operator==(const StrokeSet&) const = default;
};

/// Throws InvalidStroke with a field path (e.g. "strokes[2].points[5]") on the first violation.
void validate_strokes(const StrokeSet& strokes, int n_images, int image_width, int image_height);

inline constexpr int kNoDesignation = -1;

/// Per-cell designated image index on a (grid_w, grid_h) grid, kNoDesignation
/// where no stroke lands. Later strokes win on shared cells.
LabelGrid rasterize_strokes(const StrokeSet& strokes, int image_width, int image_height,
                            int grid_width, int grid_height);

struct GraphCutParams {
  double C = 1e6;
  double lambda = 100.0;
  double sigma = 10.0;
  bool operator==(const GraphCutParams&) const = default;
};

/// Fixed-point scale applied to every cost inside the flow network.
inline constexpr double kCostScale = 1048576.0;  // 2^20
std::int64_t scale_cost(double cost);

/// 4-neighbour pair (p, q) as cell indices with its disagreement cost.
struct PairEdge {
  int p = 0;
  int q = 0;
  double weight = 0;
};

/// Potts energy over a grid: hard stroke unaries plus feature-driven pairwise weights.
struct EnergyModel {
  int width = 0;
  int height = 0;
  int n_labels = 0;
  int base_index = 0;
  GraphCutParams params;
  LabelGrid designations;
  std::vector<PairEdge> edges;

  std::size_t cell_count() const { return static_cast<std::size_t>(width) * height; }
  double unary(std::size_t cell, int label) const {
    const int d = designations.cells[cell];
    return (d != kNoDesignation && d != label) ? params.C : 0.0;
  }
  double energy(const LabelGrid& labels) const;
  /// Energy in the integer units the solver uses.
  std::int64_t scaled_energy(const LabelGrid& labels) const;
};

/// weight(p, q) = sum_i lambda * exp(-||f_i(p) - f_i(q)||_2 / (2 sigma)).
double pairwise_weight(const ReducedFeatures& feats, std::size_t p, std::size_t q, double lambda,
                       double sigma);

EnergyModel build_energy(const ReducedFeatures& feats, const LabelGrid& designations,
                         const GraphCutParams& params, int base_index = 0);

struct LabelMap {
  LabelGrid labels;
  double energy = 0;
};

/// Exact minimiser for two labels via one min-cut. Ties resolve towards label 0.
LabelMap solve_binary(const EnergyModel& model);

/// Energies of every accepted expansion move, starting with the initial labeling.
struct ExpansionTrace {
  std::vector<std::int64_t> energies;
  int sweeps = 0;
  int accepted_moves = 0;
};

/// Alpha-expansion from an all-base start, sweeping labels in index order
/// until a full sweep no longer lowers the energy.
LabelMap solve_alpha_expansion(const EnergyModel& model, ExpansionTrace* trace = nullptr);

struct SegmentTiming {
  double select_ms = 0;
  double pca_ms = 0;
  double rasterize_ms = 0;
  double energy_ms = 0;
  double solve_ms = 0;
  double total_ms = 0;
};

struct Segmentation {
  LabelMap labels;
  SegmentTiming timing;
};

/// Rasterise, build, solve against features that were already reduced.
/// Two labels with base 0 go through solve_binary; everything else through
/// alpha-expansion, which is also exact for two labels and keeps ties on the base.
Segmentation segment_reduced(const ReducedFeatures& feats, int image_width, int image_height,
                             const StrokeSet& strokes, const GraphCutParams& params);

/// select -> PCA -> rasterise -> build -> solve.
Segmentation segment(const FeatureStack& stack, const StrokeSet& strokes,
                     const FeatureSelection& selection, const GraphCutParams& params);

}  // namespace gpm
