// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpm/config.hpp"

#include <gtest/gtest.h>

#include <fstream>

#include "fixtures.hpp"

namespace gpm {
namespace {

using testing::error_code_of;

TEST(ConfigTest, DefaultsWhenEmpty) {
  const auto c = parse_config("# nothing here\n\n");
  EXPECT_EQ(c, EngineConfig{});
  EXPECT_EQ(c.params.C, 1e6);
  EXPECT_EQ(c.params.lambda, 100.0);
  EXPECT_EQ(c.params.sigma, 10.0);
  EXPECT_EQ(c.selection.source, Projection::kK);
}

TEST(ConfigTest, ParsesAllKeys) {
  const auto c = parse_config(
      "feature.source = V\n"
      "  feature.layer=mid0  \n"
      "feature.timestep_mode = average_from:3\n"
      "# sdxl\n"
      "graphcut.sigma = 25\n"
      "graphcut.lambda = 50.5\n"
      "graphcut.C = 2e6\n");
  EXPECT_EQ(c.selection.source, Projection::kV);
  EXPECT_EQ(c.selection.layer, "mid0");
  EXPECT_EQ(c.selection.timestep_mode, TimestepMode::kAverageFrom);
  EXPECT_EQ(c.selection.average_from, 3);
  EXPECT_EQ(c.params.sigma, 25.0);
  EXPECT_EQ(c.params.lambda, 50.5);
  EXPECT_EQ(c.params.C, 2e6);

  EXPECT_EQ(parse_config("feature.timestep_mode = final").selection.timestep_mode, TimestepMode::kFinal);
}

TEST(ConfigTest, RejectsBadInput) {
  EXPECT_EQ(error_code_of([] { parse_config("graphcut.gamma = 1"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_code_of([] { parse_config("graphcut.sigma 1"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_code_of([] { parse_config("graphcut.sigma = ten"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_code_of([] { parse_config("graphcut.sigma = -1"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_code_of([] { parse_config("feature.source = X"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_code_of([] { parse_config("feature.timestep_mode = average_from:x"); }),
            ErrorCode::kInvalidArgument);
}

TEST(ConfigTest, LoadsFromFile) {
  const auto path = testing::temp_dir("cfg") / "engine.conf";
  std::ofstream(path) << "graphcut.sigma = 25\n";
  EXPECT_EQ(load_config(path).params.sigma, 25.0);
  EXPECT_EQ(error_code_of([&] { load_config(path.parent_path() / "absent.conf"); }), ErrorCode::kIo);
}

}  // namespace
}  // namespace gpm
