// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unistd.h>

namespace gpm::testing {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const fs::path p = fs::temp_directory_path() /
                     ("gpm_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

EnergyModel random_model(std::mt19937& rng, int w, int h, int n_labels, double max_weight,
                         double stroke_prob, const GraphCutParams& params) {
  std::uniform_real_distribution<double> weight(0.0, max_weight);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, n_labels - 1);
  EnergyModel m;
  m.width = w;
  m.height = h;
  m.n_labels = n_labels;
  m.params = params;
  m.designations = LabelGrid(w, h, kNoDesignation);
  for (auto& c : m.designations.cells) {
    if (coin(rng) < stroke_prob) c = label(rng);
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int p = y * w + x;
      // (0, max]: reject exact zero draws.
      auto draw = [&] {
        double v = 0;
        while (v <= 0) v = max_weight - weight(rng);
        return v;
      };
      if (x + 1 < w) m.edges.push_back({p, p + 1, draw()});
      if (y + 1 < h) m.edges.push_back({p, p + w, draw()});
    }
  }
  return m;
}

FeatureStack seam_blend_stack(int width, int height, std::uint32_t seed) {
  SyntheticOptions o;
  o.width = width;
  o.height = height;
  o.seed = seed;
  const FeatureStack base = make_synthetic_stack(o);
  std::mt19937 rng(seed);
  std::vector<Image8> images{Image8(width, height, 96), random_image(rng, width, height), Image8(width, height)};
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double ramp = 40.0 * (x + y) / (width + height);
      images[2].at(x, y, 0) = static_cast<std::uint8_t>(std::lround(124 + ramp));
      images[2].at(x, y, 1) = static_cast<std::uint8_t>(std::lround(110 + ramp));
      images[2].at(x, y, 2) = static_cast<std::uint8_t>(std::lround(100 - ramp));
    }
  }
  FeatureStack::TensorMap tensors;
  const auto& m = base.manifest();
  for (int i = 0; i < m.n_images; ++i)
    for (const auto& layer : m.layers)
      for (int t : m.timesteps)
        for (auto which : {Projection::kQ, Projection::kK, Projection::kV})
          tensors[tensor_key(i, layer.id, t, which)] = base.tensor(i, layer.id, t, which);
  return FeatureStack::from_memory(m, std::move(images), std::move(tensors));
}

StrokeSet seam_blend_strokes(int width, int height) {
  StrokeSet s;
  const double y = height / 2.0;
  s.strokes.push_back({0, {{4, y}, {width / 2.0 - 12, y}}, 3.0});
  s.strokes.push_back({2, {{width / 2.0 + 12, y}, {width - 5.0, y}}, 3.0});
  return s;
}

Image8 random_image(std::mt19937& rng, int w, int h) {
  std::uniform_int_distribution<int> px(0, 255);
  Image8 im(w, h);
  for (auto& v : im.rgb) v = static_cast<std::uint8_t>(px(rng));
  return im;
}

std::optional<ErrorCode> error_code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace gpm::testing
