// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpm/config.hpp"

#include <charconv>
#include <sstream>

#include "gpm/error.hpp"

namespace gpm {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_positive(std::string_view key, std::string_view value) {
  double v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size() || !(v > 0)) {
    throw Error(ErrorCode::kInvalidArgument,
                std::string(key) + " must be a positive number, got '" + std::string(value) + "'");
  }
  return v;
}

}  // namespace

void EngineConfig::set(std::string_view key, std::string_view value) {
  if (key == "feature.source") {
    selection.source = parse_projection(value);
  } else if (key == "feature.layer") {
    selection.layer = std::string(value);
  } else if (key == "feature.timestep_mode") {
    constexpr std::string_view prefix = "average_from:";
    if (value == "final") {
      selection.timestep_mode = TimestepMode::kFinal;
    } else if (value.starts_with(prefix)) {
      const auto num = value.substr(prefix.size());
      int t = 0;
      const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), t);
      if (ec != std::errc() || ptr != num.data() + num.size()) {
        throw Error(ErrorCode::kInvalidArgument, "bad timestep in '" + std::string(value) + "'");
      }
      selection.timestep_mode = TimestepMode::kAverageFrom;
      selection.average_from = t;
    } else {
      throw Error(ErrorCode::kInvalidArgument,
                  "feature.timestep_mode must be final or average_from:<t>");
    }
  } else if (key == "graphcut.C") {
    params.C = parse_positive(key, value);
  } else if (key == "graphcut.lambda") {
    params.lambda = parse_positive(key, value);
  } else if (key == "graphcut.sigma") {
    params.sigma = parse_positive(key, value);
  } else {
    throw Error(ErrorCode::kInvalidArgument, "unknown config key '" + std::string(key) + "'");
  }
}

EngineConfig parse_config(std::string_view text) {
  EngineConfig cfg;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kInvalidArgument, "config line " + std::to_string(lineno) + ": missing '='");
    }
    cfg.set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return cfg;
}

EngineConfig load_config(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_config(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace gpm
