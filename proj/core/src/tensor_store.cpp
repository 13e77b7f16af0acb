// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpm/tensor_store.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gpm/error.hpp"
#include "json.hpp"

namespace gpm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint16_t get_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

void check_shape(std::span<const std::uint64_t> shape) {
  if (shape.empty() || shape.size() > kGpmtMaxDims) {
    throw Error(ErrorCode::kInvalidShape, "ndim must be in [1, 5], got " + std::to_string(shape.size()));
  }
  for (auto d : shape) {
    if (d == 0) throw Error(ErrorCode::kInvalidShape, "dimension of size 0");
  }
}

std::uint64_t product(std::span<const std::uint64_t> shape) {
  std::uint64_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

DType parse_dtype(std::uint8_t code) {
  if (code == static_cast<std::uint8_t>(DType::kF32)) return DType::kF32;
  if (code == static_cast<std::uint8_t>(DType::kF16)) return DType::kF16;
  throw Error(ErrorCode::kBadDtype, "dtype code " + std::to_string(code));
}

// Parses the header from `bytes`; `total_size` is the full file length.
BlobHeader parse_header(std::span<const std::uint8_t> bytes, std::uint64_t total_size) {
  if (bytes.size() < 4) throw Error(ErrorCode::kTruncatedFile, "shorter than magic");
  if (std::memcmp(bytes.data(), kGpmtMagic, 4) != 0) {
    throw Error(ErrorCode::kBadMagic, "expected GPMT");
  }
  if (bytes.size() < kGpmtFixedHeaderBytes) throw Error(ErrorCode::kTruncatedFile, "header");
  const auto version = get_u16(bytes.data() + 4);
  if (version != kGpmtVersion) {
    throw Error(ErrorCode::kUnsupportedVersion, "version " + std::to_string(version));
  }
  BlobHeader h;
  h.dtype = parse_dtype(bytes[6]);
  const std::size_t ndim = bytes[7];
  if (ndim < 1 || ndim > kGpmtMaxDims) {
    throw Error(ErrorCode::kInvalidShape, "ndim " + std::to_string(ndim));
  }
  h.header_bytes = kGpmtFixedHeaderBytes + 8 * ndim;
  if (bytes.size() < h.header_bytes) throw Error(ErrorCode::kTruncatedFile, "dims");
  for (std::size_t i = 0; i < ndim; ++i) {
    h.shape.push_back(get_u64(bytes.data() + kGpmtFixedHeaderBytes + 8 * i));
  }
  check_shape(h.shape);
  const std::uint64_t expected = h.header_bytes + product(h.shape) * element_size(h.dtype);
  if (total_size < expected) {
    throw Error(ErrorCode::kTruncatedFile,
                "have " + std::to_string(total_size) + " bytes, need " + std::to_string(expected));
  }
  if (total_size > expected) {
    throw Error(ErrorCode::kShapeMismatch, "trailing bytes after tensor data");
  }
  return h;
}

}  // namespace

std::size_t element_size(DType dtype) { return dtype == DType::kF16 ? 2 : 4; }

std::uint16_t float_to_half(float value) {
  const std::uint32_t f = std::bit_cast<std::uint32_t>(value);
  const std::uint32_t sign = (f >> 16) & 0x8000u;
  const std::uint32_t exp = (f >> 23) & 0xFFu;
  std::uint32_t mant = f & 0x7FFFFFu;

  if (exp == 0xFF) {  // inf / nan
    return static_cast<std::uint16_t>(sign | 0x7C00u | (mant ? 0x200u | (mant >> 13) : 0u));
  }
  const int e = static_cast<int>(exp) - 127 + 15;
  if (e >= 0x1F) return static_cast<std::uint16_t>(sign | 0x7C00u);
  if (e <= 0) {
    if (e < -10) return static_cast<std::uint16_t>(sign);
    mant |= 0x800000u;
    const int shift = 14 - e;
    std::uint32_t half = mant >> shift;
    const std::uint32_t rem = mant & ((1u << shift) - 1);
    const std::uint32_t halfway = 1u << (shift - 1);
    if (rem > halfway || (rem == halfway && (half & 1u))) ++half;
    return static_cast<std::uint16_t>(sign | half);
  }
  std::uint32_t half = (static_cast<std::uint32_t>(e) << 10) | (mant >> 13);
  const std::uint32_t rem = mant & 0x1FFFu;
  if (rem > 0x1000u || (rem == 0x1000u && (half & 1u))) ++half;  // may carry into inf
  return static_cast<std::uint16_t>(sign | half);
}

float half_to_float(std::uint16_t bits) {
  const std::uint32_t sign = static_cast<std::uint32_t>(bits & 0x8000u) << 16;
  const std::uint32_t exp = (bits >> 10) & 0x1Fu;
  std::uint32_t mant = bits & 0x3FFu;
  std::uint32_t out;
  if (exp == 0) {
    if (mant == 0) {
      out = sign;
    } else {
      int e = -1;
      do {
        ++e;
        mant <<= 1;
      } while ((mant & 0x400u) == 0);
      out = sign | (static_cast<std::uint32_t>(127 - 15 - e) << 23) | ((mant & 0x3FFu) << 13);
    }
  } else if (exp == 0x1F) {
    out = sign | 0x7F800000u | (mant << 13);
  } else {
    out = sign | ((exp + 127 - 15) << 23) | (mant << 13);
  }
  return std::bit_cast<float>(out);
}

std::uint64_t TensorBlob::element_count() const { return product(shape); }

std::vector<float> TensorBlob::to_f32() const {
  const auto n = static_cast<std::size_t>(element_count());
  std::vector<float> out(n);
  if (dtype == DType::kF32) {
    for (std::size_t i = 0; i < n; ++i) {
      std::uint32_t u = 0;
      for (int b = 3; b >= 0; --b) u = (u << 8) | data[4 * i + b];
      out[i] = std::bit_cast<float>(u);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) out[i] = half_to_float(get_u16(&data[2 * i]));
  }
  return out;
}

TensorBlob TensorBlob::from_f32(std::vector<std::uint64_t> shape, std::span<const float> values) {
  check_shape(shape);
  if (product(shape) != values.size()) {
    throw Error(ErrorCode::kShapeMismatch, "value count does not match shape");
  }
  TensorBlob blob;
  blob.dtype = DType::kF32;
  blob.shape = std::move(shape);
  blob.data.reserve(values.size() * 4);
  for (float v : values) {
    const auto u = std::bit_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) blob.data.push_back(static_cast<std::uint8_t>(u >> (8 * b)));
  }
  return blob;
}

TensorBlob TensorBlob::from_f16_bits(std::vector<std::uint64_t> shape,
                                     std::span<const std::uint16_t> bits) {
  check_shape(shape);
  if (product(shape) != bits.size()) {
    throw Error(ErrorCode::kShapeMismatch, "value count does not match shape");
  }
  TensorBlob blob;
  blob.dtype = DType::kF16;
  blob.shape = std::move(shape);
  blob.data.reserve(bits.size() * 2);
  for (auto h : bits) put_u16(blob.data, h);
  return blob;
}

std::vector<std::uint8_t> encode_blob(const TensorBlob& blob) {
  check_shape(blob.shape);
  if (blob.data.size() != blob.element_count() * element_size(blob.dtype)) {
    throw Error(ErrorCode::kShapeMismatch, "data length does not match shape and dtype");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kGpmtFixedHeaderBytes + 8 * blob.shape.size() + blob.data.size());
  for (auto b : kGpmtMagic) out.push_back(b);
  put_u16(out, kGpmtVersion);
  out.push_back(static_cast<std::uint8_t>(blob.dtype));
  out.push_back(static_cast<std::uint8_t>(blob.shape.size()));
  for (auto d : blob.shape) put_u64(out, d);
  out.insert(out.end(), blob.data.begin(), blob.data.end());
  return out;
}

TensorBlob decode_blob(std::span<const std::uint8_t> bytes) {
  const BlobHeader h = parse_header(bytes, bytes.size());
  TensorBlob blob;
  blob.dtype = h.dtype;
  blob.shape = h.shape;
  blob.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(h.header_bytes), bytes.end());
  return blob;
}

void write_blob(const fs::path& path, const TensorBlob& blob) {
  const auto bytes = encode_blob(blob);
  write_file_bytes(path, bytes);
}

TensorBlob read_blob(const fs::path& path) { return decode_blob(read_file_bytes(path)); }

BlobHeader read_blob_header(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot stat " + path.string());
  std::vector<std::uint8_t> head(kGpmtFixedHeaderBytes + 8 * kGpmtMaxDims);
  in.read(reinterpret_cast<char*>(head.data()), static_cast<std::streamsize>(head.size()));
  head.resize(static_cast<std::size_t>(in.gcount()));
  return parse_header(head, size);
}

std::vector<std::uint64_t> AttentionTensor::shape() const {
  return {static_cast<std::uint64_t>(heads), static_cast<std::uint64_t>(height),
          static_cast<std::uint64_t>(width), static_cast<std::uint64_t>(dim)};
}

AttentionTensor AttentionTensor::from_blob(const TensorBlob& blob) {
  if (blob.shape.size() != 4) {
    throw Error(ErrorCode::kShapeMismatch, "attention tensors are (heads, height, width, dim)");
  }
  AttentionTensor t;
  t.heads = static_cast<int>(blob.shape[0]);
  t.height = static_cast<int>(blob.shape[1]);
  t.width = static_cast<int>(blob.shape[2]);
  t.dim = static_cast<int>(blob.shape[3]);
  t.values = blob.to_f32();
  return t;
}

TensorBlob AttentionTensor::to_blob() const { return TensorBlob::from_f32(shape(), values); }

std::string_view to_string(LayerRole role) {
  switch (role) {
    case LayerRole::kEncoder: return "encoder";
    case LayerRole::kMiddle: return "middle";
    case LayerRole::kDecoder: return "decoder";
  }
  return "encoder";
}

std::string_view to_string(Projection which) {
  switch (which) {
    case Projection::kQ: return "Q";
    case Projection::kK: return "K";
    case Projection::kV: return "V";
  }
  return "K";
}

LayerRole parse_layer_role(std::string_view text) {
  if (text == "encoder") return LayerRole::kEncoder;
  if (text == "middle") return LayerRole::kMiddle;
  if (text == "decoder") return LayerRole::kDecoder;
  throw Error(ErrorCode::kBadManifest, "unknown layer role '" + std::string(text) + "'");
}

Projection parse_projection(std::string_view text) {
  if (text == "Q") return Projection::kQ;
  if (text == "K") return Projection::kK;
  if (text == "V") return Projection::kV;
  throw Error(ErrorCode::kInvalidArgument, "projection must be Q, K or V, got '" + std::string(text) + "'");
}

std::string tensor_key(int image, std::string_view layer, int timestep, Projection which) {
  std::ostringstream os;
  os << image << '/' << layer << '/' << timestep << '/' << to_string(which);
  return os.str();
}

const LayerRecord* StackManifest::find_layer(std::string_view id) const {
  for (const auto& l : layers) {
    if (l.id == id) return &l;
  }
  return nullptr;
}

const LayerRecord& StackManifest::segmentation_layer() const {
  for (const auto& l : layers) {
    if (l.role == LayerRole::kEncoder) return l;
  }
  throw Error(ErrorCode::kLayerNotFound, "manifest has no encoder layer");
}

StackManifest parse_manifest(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBadManifest, e.what());
  }
  try {
    StackManifest m;
    m.version = j.at("version").get<int>();
    if (m.version != 1) {
      throw Error(ErrorCode::kUnsupportedVersion, "manifest version " + std::to_string(m.version));
    }
    m.n_images = j.at("n_images").get<int>();
    m.width = j.at("width").get<int>();
    m.height = j.at("height").get<int>();
    m.image_files = j.at("images").get<std::vector<std::string>>();
    for (const auto& lj : j.at("layers")) {
      LayerRecord l;
      l.id = lj.at("layer_id").get<std::string>();
      l.role = parse_layer_role(lj.at("role").get<std::string>());
      l.feat_width = lj.at("feat_width").get<int>();
      l.feat_height = lj.at("feat_height").get<int>();
      l.heads = lj.at("heads").get<int>();
      l.dim = lj.at("dim").get<int>();
      m.layers.push_back(std::move(l));
    }
    m.timesteps = j.at("timesteps").get<std::vector<int>>();
    m.tensor_files = j.at("tensors").get<std::map<std::string, std::string>>();
    if (j.contains("prompts")) m.prompts = j.at("prompts").get<std::vector<std::string>>();
    if (j.contains("seeds")) m.seeds = j.at("seeds").get<std::vector<std::int64_t>>();
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kBadManifest, e.what());
  }
}

std::string manifest_to_json(const StackManifest& m) {
  json j;
  j["version"] = m.version;
  j["n_images"] = m.n_images;
  j["width"] = m.width;
  j["height"] = m.height;
  j["images"] = m.image_files;
  j["layers"] = json::array();
  for (const auto& l : m.layers) {
    j["layers"].push_back({{"layer_id", l.id},
                           {"role", std::string(to_string(l.role))},
                           {"feat_width", l.feat_width},
                           {"feat_height", l.feat_height},
                           {"heads", l.heads},
                           {"dim", l.dim}});
  }
  j["timesteps"] = m.timesteps;
  j["tensors"] = m.tensor_files;
  j["prompts"] = m.prompts;
  j["seeds"] = m.seeds;
  return j.dump(2);
}

void FeatureStack::validate() const {
  const auto& m = manifest_;
  if (m.n_images < 1) throw Error(ErrorCode::kBadManifest, "n_images must be >= 1");
  if (m.width < 1 || m.height < 1) throw Error(ErrorCode::kBadManifest, "width/height must be >= 1");
  if (static_cast<int>(m.image_files.size()) != m.n_images) {
    throw Error(ErrorCode::kBadManifest, "images[] length differs from n_images");
  }
  if (m.layers.empty()) throw Error(ErrorCode::kBadManifest, "no layers");
  if (m.timesteps.empty()) throw Error(ErrorCode::kBadManifest, "no timesteps");
  for (const auto& l : m.layers) {
    if (l.feat_width < 1 || l.feat_height < 1 || l.heads < 1 || l.dim < 1) {
      throw Error(ErrorCode::kShapeMismatch, "layer " + l.id + " has a non-positive dimension");
    }
    if (m.width % l.feat_width != 0 || m.height % l.feat_height != 0) {
      throw Error(ErrorCode::kShapeMismatch,
                  "layer " + l.id + " grid does not divide the image size evenly");
    }
  }
  for (std::size_t i = 0; i < images_.size(); ++i) {
    if (images_[i].width != m.width || images_[i].height != m.height) {
      throw Error(ErrorCode::kImageSizeMismatch,
                  "image " + std::to_string(i) + " is " + std::to_string(images_[i].width) + "x" +
                      std::to_string(images_[i].height));
    }
  }

  for (int i = 0; i < m.n_images; ++i) {
    for (const auto& l : m.layers) {
      const auto expected = l.tensor_shape();
      for (int t : m.timesteps) {
        for (auto which : {Projection::kQ, Projection::kK, Projection::kV}) {
          const auto key = tensor_key(i, l.id, t, which);
          std::vector<std::uint64_t> shape;
          if (memory_) {
            const auto it = memory_->find(key);
            if (it == memory_->end()) throw Error(ErrorCode::kMissingTensor, key);
            shape = it->second.shape();
          } else {
            const auto it = m.tensor_files.find(key);
            if (it == m.tensor_files.end()) throw Error(ErrorCode::kMissingTensor, key);
            const fs::path p = root_ / it->second;
            if (!fs::exists(p)) throw Error(ErrorCode::kMissingTensor, key + " -> " + p.string());
            try {
              shape = read_blob_header(p).shape;
            } catch (const Error& e) {
              throw Error(e.code(), key + ": " + e.what());
            }
          }
          if (shape != expected) throw Error(ErrorCode::kShapeMismatch, key);
        }
      }
    }
  }
}

FeatureStack FeatureStack::load(const fs::path& manifest_path) {
  const auto bytes = read_file_bytes(manifest_path);
  FeatureStack s;
  s.manifest_ = parse_manifest(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
  s.root_ = manifest_path.parent_path();
  if (static_cast<int>(s.manifest_.image_files.size()) != s.manifest_.n_images) {
    throw Error(ErrorCode::kBadManifest, "images[] length differs from n_images");
  }
  for (const auto& f : s.manifest_.image_files) s.images_.push_back(read_png(s.root_ / f));
  s.validate();
  return s;
}

FeatureStack FeatureStack::from_memory(StackManifest manifest, std::vector<Image8> images,
                                       TensorMap tensors) {
  FeatureStack s;
  s.manifest_ = std::move(manifest);
  s.images_ = std::move(images);
  s.memory_ = std::make_shared<const TensorMap>(std::move(tensors));
  if (static_cast<int>(s.images_.size()) != s.manifest_.n_images) {
    throw Error(ErrorCode::kBadManifest, "image count differs from n_images");
  }
  s.validate();
  return s;
}

AttentionTensor FeatureStack::tensor(int image, std::string_view layer, int timestep,
                                     Projection which) const {
  const auto key = tensor_key(image, layer, timestep, which);
  if (memory_) {
    const auto it = memory_->find(key);
    if (it == memory_->end()) throw Error(ErrorCode::kMissingTensor, key);
    return it->second;
  }
  const auto it = manifest_.tensor_files.find(key);
  if (it == manifest_.tensor_files.end()) throw Error(ErrorCode::kMissingTensor, key);
  return AttentionTensor::from_blob(read_blob(root_ / it->second));
}

std::vector<LayerRecord> sd15_self_attention_layers(int width, int height) {
  // (grid divisor, channels, count) per resolution level; heads = 8 throughout.
  struct Level {
    const char* prefix;
    LayerRole role;
    int divisor;
    int channels;
    int count;
  };
  const Level levels[] = {
      {"down_0", LayerRole::kEncoder, 8, 320, 2},   {"down_1", LayerRole::kEncoder, 16, 640, 2},
      {"down_2", LayerRole::kEncoder, 32, 1280, 2}, {"mid", LayerRole::kMiddle, 64, 1280, 1},
      {"up_1", LayerRole::kDecoder, 32, 1280, 3},   {"up_2", LayerRole::kDecoder, 16, 640, 3},
      {"up_3", LayerRole::kDecoder, 8, 320, 3},
  };
  std::vector<LayerRecord> out;
  for (const auto& lv : levels) {
    for (int k = 0; k < lv.count; ++k) {
      LayerRecord l;
      l.id = std::string(lv.prefix) + "_attn" + std::to_string(k);
      l.role = lv.role;
      l.feat_width = width / lv.divisor;
      l.feat_height = height / lv.divisor;
      l.heads = 8;
      l.dim = lv.channels / 8;
      out.push_back(std::move(l));
    }
  }
  return out;
}

std::uint64_t stack_storage_bytes(std::span<const LayerRecord> layers, std::size_t n_timesteps,
                                  DType dtype) {
  std::uint64_t per_step = 0;
  for (const auto& l : layers) {
    const std::uint64_t elems = static_cast<std::uint64_t>(l.heads) * l.feat_height * l.feat_width * l.dim;
    per_step += 3 * (kGpmtFixedHeaderBytes + 8 * 4 + elems * element_size(dtype));
  }
  return per_step * n_timesteps;
}

}  // namespace gpm
