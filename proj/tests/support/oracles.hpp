// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

// Reference implementations used only by tests. None of these call into the
// engine code path they check.

#pragma once

#include <cstdint>
#include <vector>

#include "gpm/compositor.hpp"
#include "gpm/graph_cut.hpp"
#include "gpm/image.hpp"

namespace gpm::oracle {

/// Scaled Potts energy computed from scratch.
std::int64_t energy(const EnergyModel& model, const std::vector<int>& labels);

struct BruteForce {
  std::int64_t min_energy = 0;
  std::vector<int> argmin;
  int n_minimisers = 0;
};

/// Exhaustive minimum over n_labels^cells labelings.
BruteForce brute_force(const EnergyModel& model);

/// Dense Edmonds-Karp max-flow. cap[u][v] capacities; returns the flow value.
std::int64_t edmonds_karp(std::vector<std::vector<std::int64_t>> cap, int source, int sink);

struct EigenDecomp {
  std::vector<double> values;                // descending
  std::vector<std::vector<double>> vectors;  // vectors[k] pairs with values[k]
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix (row-major, n x n).
EigenDecomp jacobi_eigen(std::vector<double> a, int n);

/// Sample covariance (1 / (n - 1)) of row samples.
std::vector<double> covariance(const std::vector<std::vector<double>>& samples, std::vector<double>& mean);

std::vector<std::size_t> seam_pixels(const LabelGrid& labels);

/// Sobel SG score by explicit 3x3 convolution.
double sg_score(const Image8& image, const std::vector<std::size_t>& seam);

/// Region-restricted Gaussian SSIM evaluated with per-pixel window loops.
double masked_ssim(const Image8& blended, const std::vector<Image8>& stack, const LabelGrid& labels);

double psnr(const Image8& a, const Image8& b);

/// out(h, y, x, :) = sources[labels(x, y)](h, y, x, :).
AttentionTensor gather(const std::vector<AttentionTensor>& sources, const LabelGrid& labels);

}  // namespace gpm::oracle
