// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gpm {

/// Interleaved 8-bit RGB image, row-major.
struct Image8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image8() = default;
  Image8(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::uint8_t& at(int x, int y, int c) {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  bool same_size(const Image8& o) const { return width == o.width && height == o.height; }
  bool operator==(const Image8&) const = default;
};

/// Single-channel integer grid, used for label maps and stroke designations.
struct LabelGrid {
  int width = 0;
  int height = 0;
  std::vector<int> cells;

  LabelGrid() = default;
  LabelGrid(int w, int h, int fill = 0)
      : width(w), height(h), cells(static_cast<std::size_t>(w) * h, fill) {}

  int& at(int x, int y) { return cells[static_cast<std::size_t>(y) * width + x]; }
  int at(int x, int y) const { return cells[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return cells.size(); }
  bool operator==(const LabelGrid&) const = default;
};

using Rgb = std::array<std::uint8_t, 3>;

/// Palette entry used for image index `i` in indexed label PNGs.
Rgb label_color(int i);

Image8 read_png(const std::filesystem::path& path);
Image8 decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const Image8& image);
void write_png(const std::filesystem::path& path, const Image8& image);

/// Palette PNG whose pixel values are the label indices (0..255).
std::vector<std::uint8_t> encode_label_png(const LabelGrid& labels);
void write_label_png(const std::filesystem::path& path, const LabelGrid& labels);
/// Inverse of encode_label_png. Rejects PNGs that are not 8-bit palette images.
LabelGrid decode_label_png(std::span<const std::uint8_t> bytes);
LabelGrid read_label_png(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace gpm
