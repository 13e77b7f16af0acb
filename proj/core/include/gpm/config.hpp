// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "gpm/feature_prep.hpp"
#include "gpm/graph_cut.hpp"

namespace gpm {

/// Engine settings read from a `key = value` file.
///
/// Recognised keys: feature.source (K|Q|V), feature.layer,
/// feature.timestep_mode (final | average_from:<t>), graphcut.C,
/// graphcut.lambda, graphcut.sigma. Lines starting with '#' are comments.
/// SDXL-derived stacks usually want graphcut.sigma = 25.
struct EngineConfig {
  FeatureSelection selection;
  GraphCutParams params;

  void set(std::string_view key, std::string_view value);
  bool operator==(const EngineConfig&) const = default;
};

EngineConfig parse_config(std::string_view text);
EngineConfig load_config(const std::filesystem::path& path);

}  // namespace gpm
