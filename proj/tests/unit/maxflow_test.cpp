// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpm/maxflow.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"

namespace gpm {
namespace {

TEST(MaxFlowTest, TextbookNetwork) {
  // s -> a (3), s -> b (2), a -> b (1), a -> t (2), b -> t (3).
  MaxFlowGraph g;
  const int a = g.add_nodes(2);
  const int b = a + 1;
  g.add_tweights(a, 3, 2);
  g.add_tweights(b, 2, 3);
  g.add_edge(a, b, 1, 0);
  EXPECT_EQ(g.maxflow(), 5);
}

TEST(MaxFlowTest, TiedCutKeepsNodeOnSourceSide) {
  MaxFlowGraph g;
  const int n = g.add_nodes(1);
  g.add_tweights(n, 5, 5);
  EXPECT_EQ(g.maxflow(), 5);
  EXPECT_TRUE(g.in_source_set(n));
}

TEST(MaxFlowTest, UnconstrainedNodesReachingSinkAreSinkSide) {
  MaxFlowGraph g;
  g.add_nodes(3);
  g.add_tweights(0, 0, 4);
  g.add_edge(0, 1, 2, 2);
  EXPECT_EQ(g.maxflow(), 0);
  EXPECT_FALSE(g.in_source_set(0));
  EXPECT_FALSE(g.in_source_set(1));
  EXPECT_TRUE(g.in_source_set(2));
}

struct RandomNet {
  int n;
  std::vector<std::tuple<int, std::int64_t, std::int64_t>> terminals;
  std::vector<std::tuple<int, int, std::int64_t, std::int64_t>> arcs;
};

RandomNet random_net(std::mt19937& rng) {
  std::uniform_int_distribution<int> size(1, 12), cap(0, 20), coin(0, 2);
  RandomNet net;
  net.n = size(rng);
  std::uniform_int_distribution<int> node(0, net.n - 1);
  for (int i = 0; i < net.n; ++i)
    if (coin(rng)) net.terminals.emplace_back(i, cap(rng), cap(rng));
  const int m = size(rng) * 2;
  for (int k = 0; k < m; ++k) {
    const int i = node(rng), j = node(rng);
    if (i != j) net.arcs.emplace_back(i, j, cap(rng), coin(rng) ? cap(rng) : 0);
  }
  return net;
}

TEST(MaxFlowTest, MatchesEdmondsKarpAndCutIsConsistent) {
  std::mt19937 rng(99);
  MaxFlowGraph g;
  for (int trial = 0; trial < 400; ++trial) {
    const auto net = random_net(rng);
    const int s = net.n, t = net.n + 1;
    std::vector<std::vector<std::int64_t>> cap(net.n + 2, std::vector<std::int64_t>(net.n + 2, 0));
    g.clear();
    g.add_nodes(net.n);
    for (auto [i, cs, ct] : net.terminals) {
      g.add_tweights(i, cs, ct);
      cap[s][i] += cs;
      cap[i][t] += ct;
    }
    for (auto [i, j, c, r] : net.arcs) {
      g.add_edge(i, j, c, r);
      cap[i][j] += c;
      cap[j][i] += r;
    }
    const auto flow = g.maxflow();
    ASSERT_EQ(flow, oracle::edmonds_karp(cap, s, t)) << "trial " << trial;

    // The reported source set is a minimum cut.
    auto side = [&](int v) { return v == s || (v != t && g.in_source_set(v)); };
    std::int64_t cut = 0;
    for (int u = 0; u < net.n + 2; ++u)
      for (int v = 0; v < net.n + 2; ++v)
        if (side(u) && !side(v)) cut += cap[u][v];
    ASSERT_EQ(cut, flow) << "trial " << trial;

    // Maximal: forcing any sink-side node onto the source side raises the cut.
    for (int x = 0; x < net.n; ++x) {
      if (g.in_source_set(x)) continue;
      auto forced = cap;
      forced[s][x] += 1'000'000;
      EXPECT_GT(oracle::edmonds_karp(forced, s, t), flow) << "trial " << trial << " node " << x;
    }
  }
}

TEST(MaxFlowTest, GridMatchesEdmondsKarp) {
  std::mt19937 rng(5);
  std::uniform_int_distribution<int> cap(1, 50), t(0, 60);
  const int w = 6, h = 5, n = w * h;
  std::vector<std::vector<std::int64_t>> dense(n + 2, std::vector<std::int64_t>(n + 2, 0));
  MaxFlowGraph g;
  g.add_nodes(n);
  for (int p = 0; p < n; ++p) {
    const std::int64_t a = std::max(0, t(rng) - 30), b = std::max(0, t(rng) - 30);
    g.add_tweights(p, a, b);
    dense[n][p] += a;
    dense[p][n + 1] += b;
    if (p % w + 1 < w) {
      const std::int64_t c = cap(rng);
      g.add_edge(p, p + 1, c, c);
      dense[p][p + 1] += c;
      dense[p + 1][p] += c;
    }
    if (p + w < n) {
      const std::int64_t c = cap(rng);
      g.add_edge(p, p + w, c, c);
      dense[p][p + w] += c;
      dense[p + w][p] += c;
    }
  }
  EXPECT_EQ(g.maxflow(), oracle::edmonds_karp(dense, n, n + 1));
}

}  // namespace
}  // namespace gpm
