// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpm/compositor.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>

#include "gpm/error.hpp"
#include "json.hpp"

namespace gpm {

namespace fs = std::filesystem;

LabelGrid resize_nearest(const LabelGrid& src, int width, int height) {
  LabelGrid out(width, height);
  for (int y = 0; y < height; ++y) {
    const int sy = static_cast<int>(static_cast<std::int64_t>(y) * src.height / height);
    for (int x = 0; x < width; ++x) {
      const int sx = static_cast<int>(static_cast<std::int64_t>(x) * src.width / width);
      out.at(x, y) = src.at(sx, sy);
    }
  }
  return out;
}

const MaskLevel& MaskPyramid::level(std::string_view layer_id) const {
  for (const auto& l : levels) {
    if (l.layer_id == layer_id) return l;
  }
  throw Error(ErrorCode::kLayerNotFound, std::string(layer_id));
}

MaskPyramid build_masks(const LabelGrid& labels, const StackManifest& manifest) {
  const auto& seg = manifest.segmentation_layer();
  if (labels.width != seg.feat_width || labels.height != seg.feat_height) {
    throw Error(ErrorCode::kShapeMismatch, "label map does not match the segmentation layer grid");
  }
  for (int v : labels.cells) {
    if (v < 0 || v >= manifest.n_images) {
      throw Error(ErrorCode::kInvalidArgument, "label " + std::to_string(v) + " out of range");
    }
  }
  MaskPyramid pyr;
  for (const auto& layer : manifest.layers) {
    MaskLevel lv;
    lv.layer_id = layer.id;
    lv.labels = resize_nearest(labels, layer.feat_width, layer.feat_height);
    lv.masks.assign(static_cast<std::size_t>(manifest.n_images),
                    std::vector<std::uint8_t>(lv.labels.size(), 0));
    for (std::size_t c = 0; c < lv.labels.size(); ++c) lv.masks[lv.labels.cells[c]][c] = 1;
    pyr.levels.push_back(std::move(lv));
  }
  return pyr;
}

AttentionTensor mix_by_masks(std::span<const AttentionTensor> sources, const MaskLevel& level) {
  if (sources.size() != level.masks.size()) {
    throw Error(ErrorCode::kShapeMismatch, "one source tensor per mask is required");
  }
  const AttentionTensor& first = sources[0];
  for (const auto& s : sources) {
    if (!s.same_shape(first) || s.width != level.width() || s.height != level.height()) {
      throw Error(ErrorCode::kShapeMismatch, "source tensor shape differs from layer " + level.layer_id);
    }
  }
  AttentionTensor out(first.heads, first.height, first.width, first.dim);
  const std::size_t cells = level.labels.size();
  const auto dim = static_cast<std::size_t>(first.dim);
  for (std::size_t c = 0; c < cells; ++c) {
    std::size_t owner = 0;
    while (owner < level.masks.size() && level.masks[owner][c] == 0) ++owner;
    if (owner == level.masks.size()) {
      throw Error(ErrorCode::kInvalidArgument, "masks do not cover cell " + std::to_string(c));
    }
    for (int h = 0; h < first.heads; ++h) {
      const std::size_t off = (static_cast<std::size_t>(h) * cells + c) * dim;
      std::memcpy(&out.values[off], &sources[owner].values[off], dim * sizeof(float));
    }
  }
  return out;
}

KvComposite composite_kv(const FeatureStack& stack, const MaskPyramid& masks, std::string_view layer,
                         int timestep) {
  const MaskLevel& level = masks.level(layer);
  std::vector<AttentionTensor> ks, vs;
  for (int i = 0; i < stack.n_images(); ++i) {
    ks.push_back(stack.tensor(i, layer, timestep, Projection::kK));
    vs.push_back(stack.tensor(i, layer, timestep, Projection::kV));
  }
  return {mix_by_masks(ks, level), mix_by_masks(vs, level)};
}

namespace {

std::vector<AttentionTensor> q_sources(const FeatureStack& stack, std::string_view layer,
                                       int timestep, int base_index, const AttentionTensor& base_q) {
  std::vector<AttentionTensor> qs;
  for (int i = 0; i < stack.n_images(); ++i) {
    qs.push_back(i == base_index ? base_q : stack.tensor(i, layer, timestep, Projection::kQ));
  }
  return qs;
}

}  // namespace

AttentionTensor composite_q(const FeatureStack& stack, const MaskPyramid& masks,
                            std::string_view layer, int timestep, const AttentionTensor& q_model,
                            int base_index) {
  if (base_index < 0 || base_index >= stack.n_images()) {
    throw Error(ErrorCode::kInvalidArgument, "base_index out of range");
  }
  const auto* rec = stack.manifest().find_layer(layer);
  if (rec == nullptr) throw Error(ErrorCode::kLayerNotFound, std::string(layer));
  if (q_model.shape() != rec->tensor_shape()) {
    throw Error(ErrorCode::kShapeMismatch, "q_model shape differs from layer " + std::string(layer));
  }
  return mix_by_masks(q_sources(stack, layer, timestep, base_index, q_model), masks.level(layer));
}

AttentionTensor composite_q_nonbase(const FeatureStack& stack, const MaskPyramid& masks,
                                    std::string_view layer, int timestep, int base_index) {
  const auto* rec = stack.manifest().find_layer(layer);
  if (rec == nullptr) throw Error(ErrorCode::kLayerNotFound, std::string(layer));
  const AttentionTensor zeros(rec->heads, rec->feat_height, rec->feat_width, rec->dim, 0.0f);
  return composite_q(stack, masks, layer, timestep, zeros, base_index);
}

PixelComposite pixel_composite(std::span<const Image8> images, const LabelGrid& labels) {
  if (images.empty()) throw Error(ErrorCode::kInvalidArgument, "no images");
  const int width = images[0].width;
  const int height = images[0].height;
  PixelComposite out;
  out.fullres_labels = resize_nearest(labels, width, height);
  out.image = Image8(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const int l = out.fullres_labels.at(x, y);
      if (l < 0 || l >= static_cast<int>(images.size())) {
        throw Error(ErrorCode::kInvalidArgument, "label " + std::to_string(l) + " out of range");
      }
      for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = images[l].at(x, y, c);
    }
  }
  return out;
}

PixelComposite pixel_composite(const FeatureStack& stack, const LabelGrid& labels) {
  return pixel_composite(stack.images(), labels);
}

std::uint64_t label_map_hash(const LabelGrid& labels) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint32_t v) {
    for (int b = 0; b < 4; ++b) {
      h ^= (v >> (8 * b)) & 0xFFu;
      h *= 1099511628211ull;
    }
  };
  mix(static_cast<std::uint32_t>(labels.width));
  mix(static_cast<std::uint32_t>(labels.height));
  for (int v : labels.cells) mix(static_cast<std::uint32_t>(v));
  return h;
}

void export_bundle(const FeatureStack& stack, const LabelGrid& labels,
                   const BundleProvenance& provenance, const fs::path& out_dir) {
  const auto& m = stack.manifest();
  const MaskPyramid masks = build_masks(labels, m);
  fs::create_directories(out_dir / "masks");
  fs::create_directories(out_dir / "kv");

  nlohmann::json files = nlohmann::json::object();
  for (const auto& level : masks.levels) {
    std::vector<float> onehot;
    onehot.reserve(level.masks.size() * level.labels.size());
    for (const auto& mask : level.masks) {
      for (auto bit : mask) onehot.push_back(static_cast<float>(bit));
    }
    const std::string rel = "masks/" + level.layer_id + ".gpmt";
    write_blob(out_dir / rel,
               TensorBlob::from_f32({static_cast<std::uint64_t>(m.n_images),
                                     static_cast<std::uint64_t>(level.height()),
                                     static_cast<std::uint64_t>(level.width())},
                                    onehot));
    files["masks"][level.layer_id] = rel;
  }

  for (const auto& layer : m.layers) {
    for (int t : m.timesteps) {
      const std::string stem = "kv/" + layer.id + "_" + std::to_string(t);
      const KvComposite kv = composite_kv(stack, masks, layer.id, t);
      write_blob(out_dir / (stem + "_K.gpmt"), kv.k.to_blob());
      write_blob(out_dir / (stem + "_V.gpmt"), kv.v.to_blob());
      const AttentionTensor q_rest =
          composite_q_nonbase(stack, masks, layer.id, t, provenance.base_index);
      write_blob(out_dir / (stem + "_Qnonbase.gpmt"), q_rest.to_blob());
      const std::string key = layer.id + "/" + std::to_string(t);
      files["kv"][key] = {{"K", stem + "_K.gpmt"},
                          {"V", stem + "_V.gpmt"},
                          {"Qnonbase", stem + "_Qnonbase.gpmt"}};
    }
  }

  const PixelComposite preview = pixel_composite(stack, labels);
  write_png(out_dir / "preview.png", preview.image);
  write_label_png(out_dir / "labels.png", labels);

  char hash_hex[17];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(label_map_hash(labels)));

  nlohmann::json j;
  j["version"] = 1;
  j["stack_id"] = provenance.stack_id;
  j["base_index"] = provenance.base_index;
  j["label_map_hash"] = hash_hex;
  j["label_grid"] = {{"width", labels.width}, {"height", labels.height}};
  j["params"] = {{"C", provenance.params.C},
                 {"lambda", provenance.params.lambda},
                 {"sigma", provenance.params.sigma}};
  j["feature_selection"] = provenance.selection_key;
  if (provenance.base_index < static_cast<int>(m.seeds.size())) {
    j["base_seed"] = m.seeds[provenance.base_index];
  }
  if (provenance.base_index < static_cast<int>(m.prompts.size())) {
    j["base_prompt"] = m.prompts[provenance.base_index];
  }
  j["layers"] = nlohmann::json::array();
  for (const auto& layer : m.layers) {
    j["layers"].push_back({{"layer_id", layer.id},
                           {"role", std::string(to_string(layer.role))},
                           {"feat_width", layer.feat_width},
                           {"feat_height", layer.feat_height},
                           {"heads", layer.heads},
                           {"dim", layer.dim}});
  }
  j["timesteps"] = m.timesteps;
  j["q_mixing"] = "Q = M_base * q_model + Qnonbase";
  j["files"] = files;
  j["preview"] = "preview.png";
  j["labels"] = "labels.png";
  const std::string text = j.dump(2);
  write_file_bytes(out_dir / "bundle.json",
                   std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace gpm
