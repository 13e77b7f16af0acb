// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gpm {

enum class ErrorCode {
  kIo,
  kBadMagic,
  kUnsupportedVersion,
  kTruncatedFile,
  kBadDtype,
  kInvalidShape,
  kMissingTensor,
  kShapeMismatch,
  kImageSizeMismatch,
  kBadManifest,
  kLayerNotFound,
  kTimestepNotFound,
  kDegenerateData,
  kDimensionMismatch,
  kGridNotDivisible,
  kInvalidStroke,
  kInvalidArgument,
  kNoBoundary,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the engine. `code()` is stable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kBadMagic: return "BadMagic";
    case ErrorCode::kUnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kBadDtype: return "BadDtype";
    case ErrorCode::kInvalidShape: return "InvalidShape";
    case ErrorCode::kMissingTensor: return "MissingTensor";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kImageSizeMismatch: return "ImageSizeMismatch";
    case ErrorCode::kBadManifest: return "BadManifest";
    case ErrorCode::kLayerNotFound: return "LayerNotFound";
    case ErrorCode::kTimestepNotFound: return "TimestepNotFound";
    case ErrorCode::kDegenerateData: return "DegenerateData";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kGridNotDivisible: return "GridNotDivisible";
    case ErrorCode::kInvalidStroke: return "InvalidStroke";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNoBoundary: return "NoBoundary";
  }
  return "Unknown";
}

}  // namespace gpm
