// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "gpm/image.hpp"

namespace gpm {

/// Pixels (as y * width + x) with at least one 4-neighbour of a different label.
std::vector<std::size_t> seam_pixels(const LabelGrid& fullres_labels);

/// Rec.601 luma on [0, 1].
std::vector<double> luma(const Image8& image);

/// 3x3 Sobel magnitude at (x, y) with the 1/8-normalised kernel, replicate borders.
double sobel_magnitude(std::span<const double> gray, int width, int height, int x, int y);

struct SgScore {
  double value = 0;
  bool empty_seam = false;
};

/// Mean Sobel magnitude of the luma over the seam pixels; 0 flagged for an empty set.
SgScore sg_score(const Image8& image, std::span<const std::size_t> seam);

struct SeamReport {
  double sg_score = 0;
  double stack_min = 0;
  double stack_avg = 0;
  double stack_max = 0;
  bool empty_seam = false;
};

/// SG of the blended image plus min / mean / max SG of each stack image over the same seam set.
SeamReport seam_report(const Image8& blended, std::span<const Image8> stack,
                       const LabelGrid& fullres_labels);

struct Psnr {
  double db = 0;
  bool infinite = false;
};

Psnr psnr(const Image8& a, const Image8& b);

struct SsimOptions {
  int window = 11;
  double gaussian_sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 255.0;
};

/// Per region i: SSIM between `blended` and stack image i using Gaussian
/// windows restricted to region i, averaged over region pixels and RGB
/// channels. Returns the area-weighted mean across regions.
double masked_ssim(const Image8& blended, std::span<const Image8> stack,
                   const LabelGrid& fullres_labels, const SsimOptions& options = {});

struct FidelityReport {
  Psnr psnr;
  double masked_ssim = 0;
};

struct MetricsReport {
  SeamReport seam;
  FidelityReport fidelity;
};

/// Full metrics for a blended result against the stack and its full-resolution labels.
/// PSNR compares against the hard composite of those labels.
MetricsReport evaluate(const Image8& blended, std::span<const Image8> stack,
                       const LabelGrid& fullres_labels);

/// {"sg": {...}, "psnr_db": ..., "masked_ssim": ...}. Infinite PSNR is written as null
/// with "psnr_infinite": true.
std::string metrics_to_json(const MetricsReport& report);

}  // namespace gpm
