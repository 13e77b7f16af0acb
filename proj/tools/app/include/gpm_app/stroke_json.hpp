// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>

#include "gpm/graph_cut.hpp"

namespace gpm::app {

/// Parses {"base_index": B, "strokes": [{"image_index": i, "radius": r, "points": [[x, y], ...]}]}.
///
/// Structural problems (bad JSON, wrong types, missing fields) throw
/// InvalidArgument naming the offending field. Range checks against a stack
/// are left to validate_strokes.
StrokeSet parse_stroke_set(std::string_view json_text);

std::string stroke_set_to_json(const StrokeSet& strokes);

}  // namespace gpm::app
