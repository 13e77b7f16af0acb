// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <vector>

namespace gpm {

/// s-t max-flow on integer capacities using two search trees grown from the
/// terminals, with tree reuse across augmentations (adoption of orphans)
/// instead of restarting the search after every augmenting path.
///
/// Usage: add nodes, add terminal and pairwise capacities, call `maxflow()`,
/// then query `in_source_set()`.
class MaxFlowGraph {
 public:
  using Cap = std::int64_t;

  MaxFlowGraph() = default;
  MaxFlowGraph(int node_hint, int edge_hint);

  /// Drops all nodes and arcs but keeps allocated storage.
  void clear();

  /// Adds `count` nodes and returns the id of the first one.
  int add_nodes(int count);
  int node_count() const { return static_cast<int>(nodes_.size()); }

  /// Adds capacity source->node and node->sink. May be called repeatedly.
  void add_tweights(int node, Cap to_source_side, Cap to_sink_side);
  /// Adds capacity i->j of `cap` and j->i of `rev_cap`.
  void add_edge(int i, int j, Cap cap, Cap rev_cap);

  Cap maxflow();

  /// After maxflow(): true when the node cannot reach the sink in the residual
  /// graph. This is the largest source set among all minimum cuts.
  bool in_source_set(int node) const { return !reaches_sink_[node]; }

 private:
  static constexpr int kNone = -1;
  static constexpr int kTerminal = -2;
  static constexpr int kOrphan = -3;

  struct Node {
    int first = -1;
    int parent = kNone;
    int ts = 0;
    int dist = 0;
    Cap tr_cap = 0;
    bool is_sink = false;
    bool active = false;
  };
  struct Arc {
    int head;
    int next;
    Cap r_cap;
  };

  static int sister(int a) { return a ^ 1; }
  void activate(int i);
  int next_active();
  void augment(int middle);
  void process_source_orphan(int i);
  void process_sink_orphan(int i);
  void make_orphan(int i);
  void mark_sink_reachable();

  std::vector<Node> nodes_;
  std::vector<Arc> arcs_;
  std::deque<int> active_;
  std::deque<int> orphans_;
  std::vector<bool> reaches_sink_;
  Cap flow_ = 0;
  int time_ = 0;
};

}  // namespace gpm
