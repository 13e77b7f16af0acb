// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpm/feature_prep.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"

namespace gpm {
namespace {

using testing::error_code_of;

FeatureGrid grid_from_samples(const std::vector<std::vector<double>>& samples) {
  FeatureGrid g;
  g.width = static_cast<int>(samples.size());
  g.height = 1;
  g.dim = static_cast<int>(samples[0].size());
  for (const auto& s : samples)
    for (double v : s) g.values.push_back(static_cast<float>(v));
  return g;
}

std::vector<std::vector<double>> random_samples(std::mt19937& rng, int n, int d) {
  // Anisotropic Gaussian cloud so eigenvalues are well separated.
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> mix(d, std::vector<double>(d));
  for (auto& row : mix)
    for (auto& v : row) v = g(rng);
  std::vector<std::vector<double>> out(n, std::vector<double>(d, 0.0));
  for (auto& s : out) {
    std::vector<double> z(d);
    for (int k = 0; k < d; ++k) z[k] = g(rng) * 8.0 / (1.0 + k);
    for (int r = 0; r < d; ++r)
      for (int k = 0; k < d; ++k) s[r] += mix[r][k] * z[k];
    // Round through f32 so the oracle sees exactly what the grid stores.
    for (int r = 0; r < d; ++r) s[r] = static_cast<float>(s[r] + 3.0);
  }
  return out;
}

TEST(FeaturePrepTest, FlattenConcatenatesHeads) {
  AttentionTensor t(2, 1, 2, 3);
  for (std::size_t i = 0; i < t.values.size(); ++i) t.values[i] = static_cast<float>(i);
  const auto g = flatten_heads(t);
  ASSERT_EQ(g.dim, 6);
  // Cell (1, 0): head 0 -> 3,4,5; head 1 -> 9,10,11.
  const auto c = g.cell(1, 0);
  EXPECT_EQ(std::vector<float>(c.begin(), c.end()), (std::vector<float>{3, 4, 5, 9, 10, 11}));
}

TEST(FeaturePrepTest, FinalModeWithSingleTimestepIsIdentity) {
  testing::FixtureOptions o;
  o.n_timesteps = 1;
  const auto stack = testing::make_stack(o);
  const auto grids = select_features(stack, {});
  ASSERT_EQ(grids.size(), 3u);
  for (int i = 0; i < 3; ++i)
    EXPECT_EQ(grids[i].values,
              flatten_heads(stack.tensor(i, "enc0", 0, Projection::kK)).values);
}

TEST(FeaturePrepTest, AverageFromMeansTimesteps) {
  const auto stack = testing::make_stack({});
  FeatureSelection sel;
  sel.timestep_mode = TimestepMode::kAverageFrom;
  sel.average_from = 0;
  const auto grids = select_features(stack, sel);
  const auto a = flatten_heads(stack.tensor(1, "enc0", 0, Projection::kK));
  const auto b = flatten_heads(stack.tensor(1, "enc0", 1, Projection::kK));
  for (std::size_t i = 0; i < a.values.size(); ++i)
    EXPECT_FLOAT_EQ(grids[1].values[i], (a.values[i] + b.values[i]) / 2.0f);

  sel.average_from = 1;
  EXPECT_EQ(select_features(stack, sel)[1].values, b.values);

  FeatureSelection fin;
  EXPECT_EQ(select_features(stack, fin)[1].values, b.values);
}

TEST(FeaturePrepTest, SourceAndLayerSelection) {
  const auto stack = testing::make_stack({});
  FeatureSelection sel;
  sel.source = Projection::kV;
  sel.layer = "dec0";
  const auto grids = select_features(stack, sel);
  EXPECT_EQ(grids[0].width, 8);
  EXPECT_EQ(grids[0].dim, 16);
  EXPECT_EQ(grids[2].values, flatten_heads(stack.tensor(2, "dec0", 1, Projection::kV)).values);
}

TEST(FeaturePrepTest, DefaultGridIsOneEighthOfImage) {
  testing::FixtureOptions o;
  o.width = 96;
  o.height = 48;
  const auto grids = select_features(testing::make_stack(o), {});
  EXPECT_EQ(grids[0].width, 12);
  EXPECT_EQ(grids[0].height, 6);
}

TEST(FeaturePrepTest, SelectionErrors) {
  const auto stack = testing::make_stack({});
  FeatureSelection sel;
  sel.layer = "nope";
  EXPECT_EQ(error_code_of([&] { select_features(stack, sel); }), ErrorCode::kLayerNotFound);
  FeatureSelection late;
  late.timestep_mode = TimestepMode::kAverageFrom;
  late.average_from = 5;
  EXPECT_EQ(error_code_of([&] { select_features(stack, late); }), ErrorCode::kTimestepNotFound);
}

TEST(FeaturePrepTest, RankOneSamples) {
  std::vector<std::vector<double>> s;
  const std::vector<double> dir = {1, 2, -2, 0, 0, 0, 0, 0, 0, 0, 0, 4};  // norm 5
  for (int i = 0; i < 40; ++i) {
    std::vector<double> v(dir.size());
    for (std::size_t k = 0; k < dir.size(); ++k) v[k] = 7.0 + (i - 19.5) * 0.1 * dir[k];
    s.push_back(v);
  }
  const FeatureGrid g = grid_from_samples(s);
  const auto m = fit_pca(std::span(&g, 1));
  ASSERT_EQ(m.components(), 10);
  EXPECT_GT(m.explained_variance[0], 1.0);
  for (int k = 1; k < 10; ++k) EXPECT_NEAR(m.explained_variance[k], 0.0, 1e-9);
  for (std::size_t k = 0; k < dir.size(); ++k) EXPECT_NEAR(m.basis(k, 0), dir[k] / 5.0, 1e-7);
  EXPECT_FALSE(m.degenerate);
}

TEST(FeaturePrepTest, OrthogonalFrameReproducesCenteredInputUpToSign) {
  // Pairs mean +/- a_k e_k: the covariance is exactly diagonal with distinct entries.
  std::vector<std::vector<double>> s;
  for (int k = 0; k < 10; ++k) {
    for (double sign : {1.0, -1.0}) {
      std::vector<double> v(10, 2.0);
      v[k] += sign * (12.0 - k);
      s.push_back(v);
    }
  }
  const FeatureGrid grid = grid_from_samples(s);
  const auto m = fit_pca(std::span(&grid, 1));
  const auto red = project(m, std::span(&grid, 1));
  for (int c = 0; c < 10; ++c) EXPECT_NEAR(std::abs(m.basis(c, c)), 1.0, 1e-9);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (int c = 0; c < 10; ++c)
      EXPECT_NEAR(std::abs(red.at(0, i)[c]), std::abs(s[i][c] - 2.0), 1e-9) << i << "," << c;
}

TEST(FeaturePrepTest, MatchesDenseEigenOracle) {
  std::mt19937 rng(21);
  const auto s = random_samples(rng, 500, 64);
  const FeatureGrid grid = grid_from_samples(s);
  const auto m = fit_pca(std::span(&grid, 1));
  std::vector<double> mean;
  const auto cov = oracle::covariance(s, mean);
  const auto ref = oracle::jacobi_eigen(cov, 64);
  for (int k = 0; k < 64; ++k) EXPECT_NEAR(m.mean[k], mean[k], 1e-9);
  for (int c = 0; c < 10; ++c) {
    EXPECT_NEAR(m.explained_variance[c], ref.values[c], 1e-4 * ref.values[c]);
    double dot = 0;
    for (int k = 0; k < 64; ++k) dot += m.basis(k, c) * ref.vectors[c][k];
    EXPECT_NEAR(std::abs(dot), 1.0, 1e-4);
  }
}

TEST(FeaturePrepTest, BasisInvariants) {
  std::mt19937 rng(8);
  const auto s = random_samples(rng, 300, 24);
  const FeatureGrid grid = grid_from_samples(s);
  const auto m = fit_pca(std::span(&grid, 1));
  const Eigen::MatrixXd gram = m.basis.transpose() * m.basis;
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(10, 10)).cwiseAbs().maxCoeff(), 1e-4);
  for (int c = 0; c < 10; ++c) {
    if (c > 0) EXPECT_LE(m.explained_variance[c], m.explained_variance[c - 1]);
    EXPECT_GE(m.explained_variance[c], 0.0);
    Eigen::Index idx;
    m.basis.col(c).cwiseAbs().maxCoeff(&idx);
    EXPECT_GT(m.basis(idx, c), 0.0);
  }
}

TEST(FeaturePrepTest, SmallDimensionKeepsAllComponents) {
  std::mt19937 rng(4);
  const auto s = random_samples(rng, 50, 4);
  const FeatureGrid grid = grid_from_samples(s);
  EXPECT_EQ(fit_pca(std::span(&grid, 1)).components(), 4);
}

TEST(FeaturePrepTest, DegenerateInputIsFlagged) {
  std::vector<std::vector<double>> s(20, std::vector<double>(12, 3.25));
  const FeatureGrid grid = grid_from_samples(s);
  const auto m = fit_pca(std::span(&grid, 1));
  EXPECT_TRUE(m.degenerate);
  EXPECT_EQ(m.explained_variance.cwiseAbs().maxCoeff(), 0.0);
  const Eigen::MatrixXd gram = m.basis.transpose() * m.basis;
  EXPECT_TRUE(gram.isApprox(Eigen::MatrixXd::Identity(10, 10)));
  EXPECT_EQ(project(m, std::span(&grid, 1)).at(0, 3, 0)[0], 0.0);
}

TEST(FeaturePrepTest, TooFewSamplesRejected) {
  std::mt19937 rng(4);
  const FeatureGrid grid = grid_from_samples(random_samples(rng, 9, 4));
  EXPECT_EQ(error_code_of([&] { fit_pca(std::span(&grid, 1)); }), ErrorCode::kInvalidArgument);
}

TEST(FeaturePrepTest, ProjectExamples) {
  std::mt19937 rng(13);
  const auto s = random_samples(rng, 200, 16);
  const FeatureGrid grid = grid_from_samples(s);
  const auto m = fit_pca(std::span(&grid, 1));

  std::vector<float> x(16);
  for (int k = 0; k < 16; ++k) x[k] = static_cast<float>(m.mean[k]);
  EXPECT_LT(project_one(m, x).cwiseAbs().maxCoeff(), 1e-5);

  for (int k = 0; k < 16; ++k) x[k] = static_cast<float>(m.mean[k] + m.basis(k, 0));
  const auto e0 = project_one(m, x);
  EXPECT_NEAR(e0[0], 1.0, 1e-5);
  for (int c = 1; c < 10; ++c) EXPECT_NEAR(e0[c], 0.0, 1e-5);

  const auto red = project(m, std::span(&grid, 1));
  for (std::size_t cell : {0u, 57u, 199u}) {
    for (int c = 0; c < 10; ++c) {
      double ref = 0;
      for (int k = 0; k < 16; ++k) ref += m.basis(k, c) * (double(grid.values[cell * 16 + k]) - m.mean[k]);
      EXPECT_NEAR(red.at(0, cell)[c], ref, 1e-9);
    }
  }

  const std::vector<float> wrong(15, 0.0f);
  EXPECT_EQ(error_code_of([&] { project_one(m, wrong); }), ErrorCode::kDimensionMismatch);
}

TEST(FeaturePrepTest, IsometryInsideRetainedSubspace) {
  std::mt19937 rng(17);
  std::normal_distribution<double> g;
  const auto s = random_samples(rng, 300, 20);
  const FeatureGrid grid = grid_from_samples(s);
  const auto m = fit_pca(std::span(&grid, 1));
  std::vector<Eigen::VectorXd> pts;
  for (int i = 0; i < 20; ++i) {
    Eigen::VectorXd c(10);
    for (int k = 0; k < 10; ++k) c[k] = g(rng) * 5;
    pts.push_back(m.mean + m.basis * c);
  }
  for (std::size_t a = 0; a < pts.size(); ++a) {
    for (std::size_t b = a + 1; b < pts.size(); ++b) {
      std::vector<float> xa(20), xb(20);
      for (int k = 0; k < 20; ++k) xa[k] = static_cast<float>(pts[a][k]), xb[k] = static_cast<float>(pts[b][k]);
      const double in = (pts[a] - pts[b]).norm();
      const double out = (project_one(m, xa) - project_one(m, xb)).norm();
      EXPECT_NEAR(out, in, 1e-4 * in);
    }
  }
}

TEST(FeaturePrepTest, DeterministicAcrossRuns) {
  const auto stack = testing::make_stack({});
  const auto grids = select_features(stack, {});
  const auto a = fit_pca(grids);
  const auto b = fit_pca(grids);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.basis, b.basis);
  EXPECT_EQ(a.explained_variance, b.explained_variance);
}

TEST(FeaturePrepTest, ImageOrderDoesNotChangeJointFit) {
  const auto stack = testing::make_stack({});
  auto grids = select_features(stack, {});
  const auto a = fit_pca(grids);
  std::swap(grids[0], grids[2]);
  const auto b = fit_pca(grids);
  EXPECT_LT((a.mean - b.mean).cwiseAbs().maxCoeff(), 1e-6);
  for (int c = 0; c < a.components(); ++c) {
    // Well-separated leading components only; trailing noise directions may rotate.
    if (a.explained_variance[c] < 1.0) break;
    EXPECT_LT((a.basis.col(c) - b.basis.col(c)).cwiseAbs().maxCoeff(), 1e-6) << c;
  }
}

TEST(FeaturePrepTest, SavedModelReloadsExactly) {
  const auto grids = select_features(testing::make_stack({}), {});
  const auto m = fit_pca(grids);
  const auto path = testing::temp_dir("pca") / "model.json";
  save_pca(path, m);
  const auto back = load_pca(path);
  EXPECT_EQ(back.mean, m.mean);
  EXPECT_EQ(back.basis, m.basis);
  EXPECT_EQ(back.explained_variance, m.explained_variance);
  EXPECT_EQ(back.degenerate, m.degenerate);
}

TEST(FeaturePrepTest, SelectionKeyIsStable) {
  FeatureSelection sel;
  EXPECT_EQ(sel.key(), FeatureSelection{}.key());
  FeatureSelection other;
  other.source = Projection::kQ;
  EXPECT_NE(sel.key(), other.key());
}

}  // namespace
}  // namespace gpm
