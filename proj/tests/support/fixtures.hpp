// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>

#include "gpm/error.hpp"
#include "gpm/graph_cut.hpp"
#include "gpm/synthetic.hpp"
#include "gpm/tensor_store.hpp"

namespace gpm::testing {

using FixtureOptions = SyntheticOptions;

inline int halves(int x, int y, int w, int h) { return halves_regions(x, y, w, h); }
inline int quadrants(int x, int y, int w, int h) { return quadrants_regions(x, y, w, h); }

inline FeatureStack make_stack(const FixtureOptions& o) { return make_synthetic_stack(o); }
inline std::filesystem::path write_stack(const FixtureOptions& o, const std::filesystem::path& dir) {
  return write_synthetic_stack(o, dir);
}

/// Fresh, empty temporary directory unique to this process and tag.
std::filesystem::path temp_dir(const std::string& tag);

/// Random Potts model on a (w x h) grid with `n_labels`, weights in (0, max_weight],
/// each cell designated with probability `stroke_prob`.
EnergyModel random_model(std::mt19937& rng, int w, int h, int n_labels, double max_weight,
                         double stroke_prob, const GraphCutParams& params = {});

/// Runs `fn` and returns the code of the gpm::Error it throws; std::nullopt if it returns.
std::optional<ErrorCode> error_code_of(const std::function<void()>& fn);

/// Three-image halves stack for blending checks: image 0 is flat, image 1 is
/// uniform noise, image 2 is a smooth ramp offset from image 0.
FeatureStack seam_blend_stack(int width = 128, int height = 128, std::uint32_t seed = 1);

/// Strokes putting the left half on image 0 and the right half on image 2.
StrokeSet seam_blend_strokes(int width, int height);

/// Random stack-like textured image.
Image8 random_image(std::mt19937& rng, int w, int h);

}  // namespace gpm::testing
