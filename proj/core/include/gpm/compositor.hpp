// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gpm/graph_cut.hpp"
#include "gpm/image.hpp"
#include "gpm/tensor_store.hpp"

namespace gpm {

/// Nearest-neighbour resize: dst(x, y) = src(floor(x * sw / dw), floor(y * sh / dh)).
LabelGrid resize_nearest(const LabelGrid& src, int width, int height);

/// One-hot masks of a label map resized to one attention layer.
struct MaskLevel {
  std::string layer_id;
  LabelGrid labels;
  /// masks[i][cell] is 1 where the cell takes image i.
  std::vector<std::vector<std::uint8_t>> masks;

  int width() const { return labels.width; }
  int height() const { return labels.height; }
};

struct MaskPyramid {
  std::vector<MaskLevel> levels;

  const MaskLevel& level(std::string_view layer_id) const;
};

/// Labels must be on the segmentation layer grid of `manifest`.
MaskPyramid build_masks(const LabelGrid& labels, const StackManifest& manifest);

/// out(cell) = sources[i](cell) for the unique i with mask i set. Shapes must
/// match the mask level; the broadcast runs across heads and dim.
AttentionTensor mix_by_masks(std::span<const AttentionTensor> sources, const MaskLevel& level);

struct KvComposite {
  AttentionTensor k;
  AttentionTensor v;
};

KvComposite composite_kv(const FeatureStack& stack, const MaskPyramid& masks, std::string_view layer,
                         int timestep);

/// Base cells take `q_model` (the live query from the blending pass); every
/// other cell takes the stored Q of its image. The stored base Q is never read.
AttentionTensor composite_q(const FeatureStack& stack, const MaskPyramid& masks,
                            std::string_view layer, int timestep, const AttentionTensor& q_model,
                            int base_index);

/// The non-base part of composite_q: stored Q^i where label i != base, zero on base cells.
AttentionTensor composite_q_nonbase(const FeatureStack& stack, const MaskPyramid& masks,
                                    std::string_view layer, int timestep, int base_index);

struct PixelComposite {
  Image8 image;
  LabelGrid fullres_labels;
};

/// Hard per-pixel gather from the source images through upsampled labels.
PixelComposite pixel_composite(std::span<const Image8> images, const LabelGrid& labels);
PixelComposite pixel_composite(const FeatureStack& stack, const LabelGrid& labels);

struct PoissonOptions {
  double relative_tolerance = 1e-6;
  int max_iterations = 10000;
};

struct PoissonResult {
  Image8 image;
  /// Unclamped per-channel solution, H x W x 3 interleaved.
  std::vector<double> solution;
  bool fell_back = false;
  std::string warning;
  int iterations = 0;
  double relative_residual = 0;
};

/// Gradient-domain blend of the hard composite: non-base pixels are unknowns,
/// base pixels are Dirichlet values, guidance is each pixel's source-image
/// gradient (averaged across two non-base sources on shared edges).
PoissonResult poisson_blend(const PixelComposite& composite, std::span<const Image8> images,
                            int base_index, const PoissonOptions& options = {});

/// Sum over 4-neighbour edges touching the unknown region of
/// (f(p) - f(q) - g(p, q))^2 per channel, where g is the guidance used by
/// poisson_blend. `values` is H x W x 3 interleaved.
double guidance_residual(std::span<const double> values, const PixelComposite& composite,
                         std::span<const Image8> images, int base_index);

/// FNV-1a 64 over the label cells and grid size.
std::uint64_t label_map_hash(const LabelGrid& labels);

struct BundleProvenance {
  std::string stack_id;
  int base_index = 0;
  GraphCutParams params;
  std::string selection_key;
};

/// Writes a composite bundle directory:
///   masks/{layer}.gpmt          one-hot (N, h, w) as f32
///   kv/{layer}_{t}_K.gpmt, _V   composite K and V
///   kv/{layer}_{t}_Qnonbase.gpmt  non-base Q mixture (zeros on base cells)
///   bundle.json, preview.png, labels.png
void export_bundle(const FeatureStack& stack, const LabelGrid& labels,
                   const BundleProvenance& provenance, const std::filesystem::path& out_dir);

}  // namespace gpm
