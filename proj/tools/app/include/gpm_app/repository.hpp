// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>

#include "gpm/compositor.hpp"
#include "gpm/config.hpp"
#include "gpm/feature_prep.hpp"
#include "gpm/graph_cut.hpp"
#include "gpm/metrics.hpp"
#include "gpm/tensor_store.hpp"

namespace gpm::app {

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A stroke update or read named a session version that is no longer current.
class VersionConflict : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// $GPM_DATA_DIR if set, else ./gpm-data.
std::filesystem::path default_data_dir();

/// 16 hex digits of FNV-1a 64 over the manifest and every file it references.
std::string compute_stack_id(const std::filesystem::path& manifest_path);

struct SessionState {
  std::uint64_t version = 0;
  StrokeSet strokes;
};

struct SegmentationResult {
  std::uint64_t version = 0;
  LabelMap labels;
  SegmentTiming timing;
};

/// Stacks, PCA caches and stroke sessions under one data root:
///
///   stacks/{id}/manifest.json, images, tensors   ingested copy
///   stacks/{id}/pca/{selection}.json              fitted PCA models
///   stacks/{id}/session.json                      stroke set + version
///   stacks/{id}/exports/v{version}/               composite bundles
///
/// Thread-safe. Requests on different stacks never wait on each other; stroke
/// updates to one stack are serialised and checked against the version counter.
class StackRepository {
 public:
  explicit StackRepository(std::filesystem::path data_root, EngineConfig config = {});
  ~StackRepository();

  const std::filesystem::path& root() const { return root_; }
  const EngineConfig& config() const { return config_; }

  /// Validates the stack at `manifest_path` and copies it under the data root.
  /// Idempotent: ingesting identical content returns the existing id.
  std::string ingest(const std::filesystem::path& manifest_path);
  bool contains(const std::string& id) const;
  std::filesystem::path stack_dir(const std::string& id) const;

  std::shared_ptr<const FeatureStack> stack(const std::string& id);

  /// Reduced features under the configured selection; PCA fitted once per
  /// (stack, selection) and reused from memory or disk afterwards.
  std::shared_ptr<const ReducedFeatures> features(const std::string& id, double* pca_ms = nullptr);

  SessionState session(const std::string& id);
  /// Replaces the stroke set. Throws VersionConflict (mutating nothing) when
  /// `expected_version` is not the current one; InvalidStroke when the set does
  /// not fit the stack.
  std::uint64_t put_strokes(const std::string& id, std::uint64_t expected_version,
                            StrokeSet strokes);

  /// Label map for the current strokes. A given `version` must be current.
  SegmentationResult segmentation(const std::string& id,
                                  std::optional<std::uint64_t> version = std::nullopt);

  Image8 preview(const std::string& id);
  std::filesystem::path export_current(const std::string& id);
  /// `blended` is "preview" (hard composite), "poisson" (gradient-domain baseline)
  /// or a path to a PNG the server can read.
  MetricsReport metrics(const std::string& id, const std::string& blended);

 private:
  struct Entry;
  Entry& entry(const std::string& id);
  void save_session(const std::string& id, const SessionState& s) const;

  std::filesystem::path root_;
  EngineConfig config_;
  mutable std::mutex mu_;
  std::map<std::string, std::unique_ptr<Entry>> entries_;
};

}  // namespace gpm::app
