// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpm/maxflow.hpp"

#include <algorithm>
#include <limits>

namespace gpm {

namespace {
constexpr int kInfiniteDist = std::numeric_limits<int>::max();
}

MaxFlowGraph::MaxFlowGraph(int node_hint, int edge_hint) {
  nodes_.reserve(static_cast<std::size_t>(node_hint));
  arcs_.reserve(2 * static_cast<std::size_t>(edge_hint));
}

void MaxFlowGraph::clear() {
  nodes_.clear();
  arcs_.clear();
  active_.clear();
  orphans_.clear();
  reaches_sink_.clear();
  flow_ = 0;
  time_ = 0;
}

int MaxFlowGraph::add_nodes(int count) {
  const int first = static_cast<int>(nodes_.size());
  nodes_.resize(nodes_.size() + static_cast<std::size_t>(count));
  return first;
}

void MaxFlowGraph::add_tweights(int node, Cap to_source_side, Cap to_sink_side) {
  Node& n = nodes_[node];
  const Cap delta = n.tr_cap;
  if (delta > 0) {
    to_source_side += delta;
  } else {
    to_sink_side -= delta;
  }
  flow_ += std::min(to_source_side, to_sink_side);
  n.tr_cap = to_source_side - to_sink_side;
}

void MaxFlowGraph::add_edge(int i, int j, Cap cap, Cap rev_cap) {
  const int a = static_cast<int>(arcs_.size());
  arcs_.push_back({j, nodes_[i].first, cap});
  arcs_.push_back({i, nodes_[j].first, rev_cap});
  nodes_[i].first = a;
  nodes_[j].first = a + 1;
}

void MaxFlowGraph::activate(int i) {
  if (!nodes_[i].active) {
    nodes_[i].active = true;
    active_.push_back(i);
  }
}

int MaxFlowGraph::next_active() {
  while (!active_.empty()) {
    const int i = active_.front();
    active_.pop_front();
    nodes_[i].active = false;
    if (nodes_[i].parent != kNone) return i;
  }
  return -1;
}

void MaxFlowGraph::make_orphan(int i) {
  nodes_[i].parent = kOrphan;
  orphans_.push_back(i);
}

void MaxFlowGraph::augment(int middle) {
  // Bottleneck along source tree, middle arc and sink tree.
  Cap bottleneck = arcs_[middle].r_cap;
  int i = arcs_[sister(middle)].head;
  for (;;) {
    const int a = nodes_[i].parent;
    if (a == kTerminal) break;
    bottleneck = std::min(bottleneck, arcs_[sister(a)].r_cap);
    i = arcs_[a].head;
  }
  bottleneck = std::min(bottleneck, nodes_[i].tr_cap);

  i = arcs_[middle].head;
  for (;;) {
    const int a = nodes_[i].parent;
    if (a == kTerminal) break;
    bottleneck = std::min(bottleneck, arcs_[a].r_cap);
    i = arcs_[a].head;
  }
  bottleneck = std::min(bottleneck, -nodes_[i].tr_cap);

  arcs_[sister(middle)].r_cap += bottleneck;
  arcs_[middle].r_cap -= bottleneck;

  i = arcs_[sister(middle)].head;
  for (;;) {
    const int a = nodes_[i].parent;
    if (a == kTerminal) {
      nodes_[i].tr_cap -= bottleneck;
      if (nodes_[i].tr_cap == 0) make_orphan(i);
      break;
    }
    arcs_[a].r_cap += bottleneck;
    arcs_[sister(a)].r_cap -= bottleneck;
    if (arcs_[sister(a)].r_cap == 0) make_orphan(i);
    i = arcs_[a].head;
  }

  i = arcs_[middle].head;
  for (;;) {
    const int a = nodes_[i].parent;
    if (a == kTerminal) {
      nodes_[i].tr_cap += bottleneck;
      if (nodes_[i].tr_cap == 0) make_orphan(i);
      break;
    }
    arcs_[sister(a)].r_cap += bottleneck;
    arcs_[a].r_cap -= bottleneck;
    if (arcs_[a].r_cap == 0) make_orphan(i);
    i = arcs_[a].head;
  }

  flow_ += bottleneck;
}

void MaxFlowGraph::process_source_orphan(int i) {
  int best_arc = -1;
  int best_dist = kInfiniteDist;

  for (int a0 = nodes_[i].first; a0 != -1; a0 = arcs_[a0].next) {
    if (arcs_[sister(a0)].r_cap == 0) continue;
    int j = arcs_[a0].head;
    if (nodes_[j].is_sink || nodes_[j].parent == kNone) continue;

    // Walk to the origin of j.
    int d = 0;
    for (;;) {
      if (nodes_[j].ts == time_) {
        d += nodes_[j].dist;
        break;
      }
      const int a = nodes_[j].parent;
      ++d;
      if (a == kTerminal) {
        nodes_[j].ts = time_;
        nodes_[j].dist = 1;
        break;
      }
      if (a == kOrphan) {
        d = kInfiniteDist;
        break;
      }
      j = arcs_[a].head;
    }
    if (d < kInfiniteDist) {
      if (d < best_dist) {
        best_arc = a0;
        best_dist = d;
      }
      for (j = arcs_[a0].head; nodes_[j].ts != time_; j = arcs_[nodes_[j].parent].head) {
        nodes_[j].ts = time_;
        nodes_[j].dist = d--;
      }
    }
  }

  if (best_arc != -1) {
    nodes_[i].parent = best_arc;
    nodes_[i].ts = time_;
    nodes_[i].dist = best_dist + 1;
    return;
  }

  for (int a0 = nodes_[i].first; a0 != -1; a0 = arcs_[a0].next) {
    const int j = arcs_[a0].head;
    const int a = nodes_[j].parent;
    if (nodes_[j].is_sink || a == kNone) continue;
    if (arcs_[sister(a0)].r_cap > 0) activate(j);
    if (a != kTerminal && a != kOrphan && arcs_[a].head == i) make_orphan(j);
  }
  nodes_[i].parent = kNone;
}

void MaxFlowGraph::process_sink_orphan(int i) {
  int best_arc = -1;
  int best_dist = kInfiniteDist;

  for (int a0 = nodes_[i].first; a0 != -1; a0 = arcs_[a0].next) {
    if (arcs_[a0].r_cap == 0) continue;
    int j = arcs_[a0].head;
    if (!nodes_[j].is_sink || nodes_[j].parent == kNone) continue;

    int d = 0;
    for (;;) {
      if (nodes_[j].ts == time_) {
        d += nodes_[j].dist;
        break;
      }
      const int a = nodes_[j].parent;
      ++d;
      if (a == kTerminal) {
        nodes_[j].ts = time_;
        nodes_[j].dist = 1;
        break;
      }
      if (a == kOrphan) {
        d = kInfiniteDist;
        break;
      }
      j = arcs_[a].head;
    }
    if (d < kInfiniteDist) {
      if (d < best_dist) {
        best_arc = a0;
        best_dist = d;
      }
      for (j = arcs_[a0].head; nodes_[j].ts != time_; j = arcs_[nodes_[j].parent].head) {
        nodes_[j].ts = time_;
        nodes_[j].dist = d--;
      }
    }
  }

  if (best_arc != -1) {
    nodes_[i].parent = best_arc;
    nodes_[i].ts = time_;
    nodes_[i].dist = best_dist + 1;
    return;
  }

  for (int a0 = nodes_[i].first; a0 != -1; a0 = arcs_[a0].next) {
    const int j = arcs_[a0].head;
    const int a = nodes_[j].parent;
    if (!nodes_[j].is_sink || a == kNone) continue;
    if (arcs_[a0].r_cap > 0) activate(j);
    if (a != kTerminal && a != kOrphan && arcs_[a].head == i) make_orphan(j);
  }
  nodes_[i].parent = kNone;
}

MaxFlowGraph::Cap MaxFlowGraph::maxflow() {
  active_.clear();
  orphans_.clear();
  time_ = 0;
  for (int i = 0; i < node_count(); ++i) {
    Node& n = nodes_[i];
    n.active = false;
    n.ts = 0;
    if (n.tr_cap > 0) {
      n.is_sink = false;
      n.parent = kTerminal;
      n.dist = 1;
      activate(i);
    } else if (n.tr_cap < 0) {
      n.is_sink = true;
      n.parent = kTerminal;
      n.dist = 1;
      activate(i);
    } else {
      n.parent = kNone;
    }
  }

  int current = -1;
  for (;;) {
    int i = current;
    if (i == -1 || nodes_[i].parent == kNone) {
      i = next_active();
      if (i == -1) break;
    }

    int middle = -1;
    if (!nodes_[i].is_sink) {
      for (int a = nodes_[i].first; a != -1; a = arcs_[a].next) {
        if (arcs_[a].r_cap == 0) continue;
        const int j = arcs_[a].head;
        Node& nj = nodes_[j];
        if (nj.parent == kNone) {
          nj.is_sink = false;
          nj.parent = sister(a);
          nj.ts = nodes_[i].ts;
          nj.dist = nodes_[i].dist + 1;
          activate(j);
        } else if (nj.is_sink) {
          middle = a;
          break;
        } else if (nj.ts <= nodes_[i].ts && nj.dist > nodes_[i].dist) {
          nj.parent = sister(a);
          nj.ts = nodes_[i].ts;
          nj.dist = nodes_[i].dist + 1;
        }
      }
    } else {
      for (int a = nodes_[i].first; a != -1; a = arcs_[a].next) {
        if (arcs_[sister(a)].r_cap == 0) continue;
        const int j = arcs_[a].head;
        Node& nj = nodes_[j];
        if (nj.parent == kNone) {
          nj.is_sink = true;
          nj.parent = sister(a);
          nj.ts = nodes_[i].ts;
          nj.dist = nodes_[i].dist + 1;
          activate(j);
        } else if (!nj.is_sink) {
          middle = sister(a);
          break;
        } else if (nj.ts <= nodes_[i].ts && nj.dist > nodes_[i].dist) {
          nj.parent = sister(a);
          nj.ts = nodes_[i].ts;
          nj.dist = nodes_[i].dist + 1;
        }
      }
    }

    ++time_;

    if (middle != -1) {
      current = i;  // keep growing from i after the augmentation
      augment(middle);
      while (!orphans_.empty()) {
        const int o = orphans_.front();
        orphans_.pop_front();
        if (nodes_[o].is_sink) {
          process_sink_orphan(o);
        } else {
          process_source_orphan(o);
        }
      }
    } else {
      current = -1;
    }
  }

  mark_sink_reachable();
  return flow_;
}

void MaxFlowGraph::mark_sink_reachable() {
  reaches_sink_.assign(nodes_.size(), false);
  std::vector<int> stack;
  for (int i = 0; i < node_count(); ++i) {
    if (nodes_[i].tr_cap < 0) {
      reaches_sink_[i] = true;
      stack.push_back(i);
    }
  }
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int a = nodes_[v].first; a != -1; a = arcs_[a].next) {
      // u -> v has residual capacity when the reverse of v->u does.
      const int u = arcs_[a].head;
      if (!reaches_sink_[u] && arcs_[sister(a)].r_cap > 0) {
        reaches_sink_[u] = true;
        stack.push_back(u);
      }
    }
  }
}

}  // namespace gpm
