// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gpm/image.hpp"

namespace gpm {

// GPMT container:
//   "GPMT" | u16 version | u8 dtype | u8 ndim | ndim x u64 dims | raw LE data
inline constexpr std::uint8_t kGpmtMagic[4] = {0x47, 0x50, 0x4D, 0x54};
inline constexpr std::uint16_t kGpmtVersion = 1;
inline constexpr std::size_t kGpmtFixedHeaderBytes = 8;
inline constexpr std::size_t kGpmtMaxDims = 5;

enum class DType : std::uint8_t { kF32 = 1, kF16 = 2 };

std::size_t element_size(DType dtype);

std::uint16_t float_to_half(float value);
float half_to_float(std::uint16_t bits);

/// A tensor exactly as stored on disk. `data` holds little-endian element bytes.
struct TensorBlob {
  DType dtype = DType::kF32;
  std::vector<std::uint64_t> shape;
  std::vector<std::uint8_t> data;

  std::uint64_t element_count() const;
  /// Decodes (and for f16, promotes) every element to f32.
  std::vector<float> to_f32() const;

  static TensorBlob from_f32(std::vector<std::uint64_t> shape, std::span<const float> values);
  static TensorBlob from_f16_bits(std::vector<std::uint64_t> shape,
                                  std::span<const std::uint16_t> bits);

  bool operator==(const TensorBlob&) const = default;
};

struct BlobHeader {
  DType dtype = DType::kF32;
  std::vector<std::uint64_t> shape;
  std::size_t header_bytes = 0;
};

std::vector<std::uint8_t> encode_blob(const TensorBlob& blob);
TensorBlob decode_blob(std::span<const std::uint8_t> bytes);

void write_blob(const std::filesystem::path& path, const TensorBlob& blob);
TensorBlob read_blob(const std::filesystem::path& path);
/// Parses only the header and checks the file length against it.
BlobHeader read_blob_header(const std::filesystem::path& path);

/// Q/K/V tensor in (heads, height, width, dim) layout, always f32 in memory.
struct AttentionTensor {
  int heads = 0;
  int height = 0;
  int width = 0;
  int dim = 0;
  std::vector<float> values;

  AttentionTensor() = default;
  AttentionTensor(int heads_, int height_, int width_, int dim_, float fill = 0.0f)
      : heads(heads_), height(height_), width(width_), dim(dim_),
        values(static_cast<std::size_t>(heads_) * height_ * width_ * dim_, fill) {}

  std::size_t index(int head, int y, int x, int c) const {
    return ((static_cast<std::size_t>(head) * height + y) * width + x) * dim + c;
  }
  float& at(int head, int y, int x, int c) { return values[index(head, y, x, c)]; }
  float at(int head, int y, int x, int c) const { return values[index(head, y, x, c)]; }

  bool same_shape(const AttentionTensor& o) const {
    return heads == o.heads && height == o.height && width == o.width && dim == o.dim;
  }
  std::vector<std::uint64_t> shape() const;

  static AttentionTensor from_blob(const TensorBlob& blob);
  TensorBlob to_blob() const;

  bool operator==(const AttentionTensor&) const = default;
};

enum class LayerRole { kEncoder, kMiddle, kDecoder };
enum class Projection { kQ, kK, kV };

std::string_view to_string(LayerRole role);
std::string_view to_string(Projection which);
LayerRole parse_layer_role(std::string_view text);
Projection parse_projection(std::string_view text);

struct LayerRecord {
  std::string id;
  LayerRole role = LayerRole::kEncoder;
  int feat_width = 0;
  int feat_height = 0;
  int heads = 0;
  int dim = 0;

  std::vector<std::uint64_t> tensor_shape() const {
    return {static_cast<std::uint64_t>(heads), static_cast<std::uint64_t>(feat_height),
            static_cast<std::uint64_t>(feat_width), static_cast<std::uint64_t>(dim)};
  }
  bool operator==(const LayerRecord&) const = default;
};

/// Manifest key "{img}/{layer}/{t}/{Q|K|V}".
std::string tensor_key(int image, std::string_view layer, int timestep, Projection which);

struct StackManifest {
  int version = 1;
  int n_images = 0;
  int width = 0;
  int height = 0;
  std::vector<std::string> image_files;
  std::vector<LayerRecord> layers;
  std::vector<int> timesteps;
  std::map<std::string, std::string> tensor_files;
  std::vector<std::string> prompts;
  std::vector<std::int64_t> seeds;

  const LayerRecord* find_layer(std::string_view id) const;
  /// The first encoder layer in manifest order; throws LayerNotFound if none.
  const LayerRecord& segmentation_layer() const;

  bool operator==(const StackManifest&) const = default;
};

StackManifest parse_manifest(std::string_view json_text);
std::string manifest_to_json(const StackManifest& manifest);

/// Images plus lazily read Q/K/V tensors for one generated stack.
///
/// Read-only after construction and safe for concurrent readers.
class FeatureStack {
 public:
  /// Loads and eagerly validates every manifest invariant; tensor payloads stay on disk.
  static FeatureStack load(const std::filesystem::path& manifest_path);

  using TensorMap = std::map<std::string, AttentionTensor>;
  /// In-memory stack (fixtures, tests). Validated like `load`.
  static FeatureStack from_memory(StackManifest manifest, std::vector<Image8> images,
                                  TensorMap tensors);

  const StackManifest& manifest() const { return manifest_; }
  const std::vector<Image8>& images() const { return images_; }
  int n_images() const { return manifest_.n_images; }
  int width() const { return manifest_.width; }
  int height() const { return manifest_.height; }
  const std::filesystem::path& root() const { return root_; }

  AttentionTensor tensor(int image, std::string_view layer, int timestep, Projection which) const;

 private:
  FeatureStack() = default;
  void validate() const;

  StackManifest manifest_;
  std::filesystem::path root_;
  std::vector<Image8> images_;
  std::shared_ptr<const TensorMap> memory_;
};

/// Layer list of a Stable Diffusion 1.5 U-Net's self-attention blocks at (W, H).
std::vector<LayerRecord> sd15_self_attention_layers(int width, int height);

/// Bytes needed to store Q, K and V of every layer at every timestep for one image.
std::uint64_t stack_storage_bytes(std::span<const LayerRecord> layers, std::size_t n_timesteps,
                                  DType dtype);

}  // namespace gpm
