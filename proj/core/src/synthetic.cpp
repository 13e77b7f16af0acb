// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpm/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace gpm {

namespace fs = std::filesystem;

int halves_regions(int x, int, int grid_w, int) { return x < grid_w / 2 ? 0 : 1; }

int quadrants_regions(int x, int y, int grid_w, int grid_h) {
  return (x < grid_w / 2 ? 0 : 1) + (y < grid_h / 2 ? 0 : 2);
}

namespace {

StackManifest fixture_manifest(const SyntheticOptions& o) {
  StackManifest m;
  m.n_images = o.n_images;
  m.width = o.width;
  m.height = o.height;
  const int gw = o.width / 8;
  const int gh = o.height / 8;
  m.layers.push_back({"enc0", LayerRole::kEncoder, gw, gh, o.heads, o.dim});
  if (o.extra_layers) {
    m.layers.push_back({"mid0", LayerRole::kMiddle, std::max(1, gw / 2), std::max(1, gh / 2), o.heads, o.dim});
    m.layers.push_back({"dec0", LayerRole::kDecoder, gw, gh, o.heads, o.dim});
  }
  for (int t = 0; t < o.n_timesteps; ++t) m.timesteps.push_back(t);
  for (int i = 0; i < o.n_images; ++i) {
    m.image_files.push_back("image_" + std::to_string(i) + ".png");
    m.prompts.push_back("synthetic scene");
    m.seeds.push_back(1000 + i);
  }
  return m;
}

// Cell region at layer resolution, sampled from the segmentation grid.
int region_at(const SyntheticOptions& o, int x, int y, int lw, int lh) {
  const int gw = o.width / 8;
  const int gh = o.height / 8;
  return o.regions(x * gw / lw, y * gh / lh, gw, gh);
}

}  // namespace

FeatureStack make_synthetic_stack(const SyntheticOptions& o) {
  std::mt19937 rng(o.seed);
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  std::uniform_int_distribution<int> color(40, 215);
  StackManifest m = fixture_manifest(o);

  int n_regions = 0;
  const int gw = o.width / 8;
  const int gh = o.height / 8;
  for (int y = 0; y < gh; ++y)
    for (int x = 0; x < gw; ++x) n_regions = std::max(n_regions, o.regions(x, y, gw, gh) + 1);

  const int d = o.heads * o.dim;
  // centres[i][r] is a D-vector.
  std::vector<std::vector<std::vector<float>>> centres(o.n_images);
  for (auto& per_image : centres) {
    per_image.resize(n_regions);
    for (auto& c : per_image) {
      c.resize(d);
      for (auto& v : c) v = o.center_scale * gauss(rng);
    }
  }

  FeatureStack::TensorMap tensors;
  for (int i = 0; i < o.n_images; ++i) {
    for (const auto& layer : m.layers) {
      for (int t : m.timesteps) {
        // Earlier timesteps carry less of the region signal.
        const float blend = static_cast<float>(t + 1) / static_cast<float>(o.n_timesteps);
        AttentionTensor k(layer.heads, layer.feat_height, layer.feat_width, layer.dim);
        for (int y = 0; y < layer.feat_height; ++y) {
          for (int x = 0; x < layer.feat_width; ++x) {
            const int r = region_at(o, x, y, layer.feat_width, layer.feat_height);
            for (int h = 0; h < layer.heads; ++h) {
              for (int c = 0; c < layer.dim; ++c) {
                k.at(h, y, x, c) = blend * centres[i][r][h * layer.dim + c] + o.noise * gauss(rng);
              }
            }
          }
        }
        AttentionTensor q = k, v = k;
        for (std::size_t e = 0; e < k.values.size(); ++e) {
          q.values[e] = 0.5f * k.values[e] + 1.0f;
          v.values[e] = -0.25f * k.values[e] + 0.1f * static_cast<float>(i);
        }
        tensors[tensor_key(i, layer.id, t, Projection::kQ)] = std::move(q);
        tensors[tensor_key(i, layer.id, t, Projection::kV)] = std::move(v);
        tensors[tensor_key(i, layer.id, t, Projection::kK)] = std::move(k);
      }
    }
  }

  std::vector<Image8> images;
  for (int i = 0; i < o.n_images; ++i) {
    std::vector<std::array<int, 3>> palette(n_regions);
    for (auto& p : palette) p = {color(rng), color(rng), color(rng)};
    std::uniform_int_distribution<int> tex(-6, 6);
    Image8 im(o.width, o.height);
    for (int y = 0; y < o.height; ++y) {
      for (int x = 0; x < o.width; ++x) {
        const int r = o.regions(x / 8, y / 8, gw, gh);
        for (int c = 0; c < 3; ++c) {
          im.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(palette[r][c] + tex(rng), 0, 255));
        }
      }
    }
    images.push_back(std::move(im));
  }
  return FeatureStack::from_memory(std::move(m), std::move(images), std::move(tensors));
}

fs::path write_synthetic_stack(const SyntheticOptions& o, const fs::path& dir) {
  return save_stack(make_synthetic_stack(o), dir);
}

fs::path save_stack(const FeatureStack& s, const fs::path& dir) {
  fs::create_directories(dir / "tensors");
  StackManifest m = s.manifest();
  m.tensor_files.clear();
  for (int i = 0; i < m.n_images; ++i) {
    fs::create_directories((dir / m.image_files[i]).parent_path());
    write_png(dir / m.image_files[i], s.images()[i]);
  }
  for (int i = 0; i < m.n_images; ++i) {
    for (const auto& layer : m.layers) {
      for (int t : m.timesteps) {
        for (auto which : {Projection::kQ, Projection::kK, Projection::kV}) {
          const auto key = tensor_key(i, layer.id, t, which);
          const std::string rel = "tensors/" + std::to_string(i) + "_" + layer.id + "_" +
                                  std::to_string(t) + "_" + std::string(to_string(which)) + ".gpmt";
          write_blob(dir / rel, s.tensor(i, layer.id, t, which).to_blob());
          m.tensor_files[key] = rel;
        }
      }
    }
  }
  const std::string text = manifest_to_json(m);
  write_file_bytes(dir / "manifest.json",
                   std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  return dir / "manifest.json";
}

}  // namespace gpm
