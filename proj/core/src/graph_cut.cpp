// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpm/graph_cut.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "gpm/error.hpp"
#include "gpm/maxflow.hpp"

namespace gpm {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void stamp_disk(std::vector<std::uint8_t>& hit, double cx, double cy, double r, int image_width,
                int image_height, int sx, int sy, int grid_width) {
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - r)));
  const int x1 = std::min(image_width - 1, static_cast<int>(std::ceil(cx + r)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - r)));
  const int y1 = std::min(image_height - 1, static_cast<int>(std::ceil(cy + r)));
  const double r2 = r * r;
  for (int y = y0; y <= y1; ++y) {
    const double dy = y - cy;
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - cx;
      if (dx * dx + dy * dy <= r2) {
        hit[static_cast<std::size_t>(y / sy) * grid_width + x / sx] = 1;
      }
    }
  }
}

}  // namespace

void validate_strokes(const StrokeSet& set, int n_images, int image_width, int image_height) {
  if (set.base_index < 0 || set.base_index >= n_images) {
    throw Error(ErrorCode::kInvalidStroke, "base_index: " + std::to_string(set.base_index) +
                                               " not in [0, " + std::to_string(n_images) + ")");
  }
  for (std::size_t s = 0; s < set.strokes.size(); ++s) {
    const auto& st = set.strokes[s];
    const std::string where = "strokes[" + std::to_string(s) + "]";
    if (st.image_index < 0 || st.image_index >= n_images) {
      throw Error(ErrorCode::kInvalidStroke, where + ".image_index: " + std::to_string(st.image_index) +
                                                 " not in [0, " + std::to_string(n_images) + ")");
    }
    if (!(st.radius >= 1.0)) {
      throw Error(ErrorCode::kInvalidStroke, where + ".radius: must be >= 1");
    }
    if (st.points.empty()) {
      throw Error(ErrorCode::kInvalidStroke, where + ".points: empty polyline");
    }
    for (std::size_t k = 0; k < st.points.size(); ++k) {
      const auto& p = st.points[k];
      if (!(p.x >= 0 && p.x < image_width && p.y >= 0 && p.y < image_height)) {
        throw Error(ErrorCode::kInvalidStroke,
                    where + ".points[" + std::to_string(k) + "]: (" + std::to_string(p.x) + ", " +
                        std::to_string(p.y) + ") outside [0," + std::to_string(image_width) + ")x[0," +
                        std::to_string(image_height) + ")");
      }
    }
  }
}

LabelGrid rasterize_strokes(const StrokeSet& set, int image_width, int image_height, int grid_width,
                            int grid_height) {
  if (grid_width < 1 || grid_height < 1 || image_width % grid_width != 0 ||
      image_height % grid_height != 0) {
    throw Error(ErrorCode::kGridNotDivisible,
                std::to_string(image_width) + "x" + std::to_string(image_height) + " by " +
                    std::to_string(grid_width) + "x" + std::to_string(grid_height));
  }
  const int sx = image_width / grid_width;
  const int sy = image_height / grid_height;
  LabelGrid out(grid_width, grid_height, kNoDesignation);
  std::vector<std::uint8_t> hit(out.size());

  for (const auto& stroke : set.strokes) {
    std::fill(hit.begin(), hit.end(), 0);
    const double r = stroke.radius;
    const auto& pts = stroke.points;
    stamp_disk(hit, pts[0].x, pts[0].y, r, image_width, image_height, sx, sy, grid_width);
    for (std::size_t k = 1; k < pts.size(); ++k) {
      const double dx = pts[k].x - pts[k - 1].x;
      const double dy = pts[k].y - pts[k - 1].y;
      const int steps = std::max(1, static_cast<int>(std::ceil(std::hypot(dx, dy) / 0.5)));
      for (int j = 1; j <= steps; ++j) {
        const double t = static_cast<double>(j) / steps;
        stamp_disk(hit, pts[k - 1].x + t * dx, pts[k - 1].y + t * dy, r, image_width, image_height,
                   sx, sy, grid_width);
      }
    }
    for (std::size_t c = 0; c < hit.size(); ++c) {
      if (hit[c]) out.cells[c] = stroke.image_index;
    }
  }
  return out;
}

std::int64_t scale_cost(double cost) { return std::llround(cost * kCostScale); }

double EnergyModel::energy(const LabelGrid& labels) const {
  double e = 0;
  for (std::size_t c = 0; c < cell_count(); ++c) e += unary(c, labels.cells[c]);
  for (const auto& edge : edges) {
    if (labels.cells[edge.p] != labels.cells[edge.q]) e += edge.weight;
  }
  return e;
}

std::int64_t EnergyModel::scaled_energy(const LabelGrid& labels) const {
  const std::int64_t c_scaled = scale_cost(params.C);
  std::int64_t e = 0;
  for (std::size_t c = 0; c < cell_count(); ++c) {
    const int d = designations.cells[c];
    if (d != kNoDesignation && d != labels.cells[c]) e += c_scaled;
  }
  for (const auto& edge : edges) {
    if (labels.cells[edge.p] != labels.cells[edge.q]) e += scale_cost(edge.weight);
  }
  return e;
}

double pairwise_weight(const ReducedFeatures& feats, std::size_t p, std::size_t q, double lambda,
                       double sigma) {
  double w = 0;
  for (int i = 0; i < feats.n_images(); ++i) {
    const auto fp = feats.at(i, p);
    const auto fq = feats.at(i, q);
    double d2 = 0;
    for (std::size_t k = 0; k < fp.size(); ++k) {
      const double d = fp[k] - fq[k];
      d2 += d * d;
    }
    w += lambda * std::exp(-std::sqrt(d2) / (2.0 * sigma));
  }
  return w;
}

EnergyModel build_energy(const ReducedFeatures& feats, const LabelGrid& designations,
                         const GraphCutParams& params, int base_index) {
  if (designations.width != feats.width || designations.height != feats.height) {
    throw Error(ErrorCode::kShapeMismatch, "designation grid does not match feature grid");
  }
  if (!(params.sigma > 0) || !(params.lambda > 0) || !(params.C > 0)) {
    throw Error(ErrorCode::kInvalidArgument, "C, lambda and sigma must be positive");
  }
  EnergyModel m;
  m.width = feats.width;
  m.height = feats.height;
  m.n_labels = feats.n_images();
  m.base_index = base_index;
  m.params = params;
  m.designations = designations;
  m.edges.reserve(2 * m.cell_count());
  for (int y = 0; y < m.height; ++y) {
    for (int x = 0; x < m.width; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * m.width + x;
      if (x + 1 < m.width) {
        m.edges.push_back({static_cast<int>(p), static_cast<int>(p + 1),
                           pairwise_weight(feats, p, p + 1, params.lambda, params.sigma)});
      }
      if (y + 1 < m.height) {
        const std::size_t q = p + static_cast<std::size_t>(m.width);
        m.edges.push_back({static_cast<int>(p), static_cast<int>(q),
                           pairwise_weight(feats, p, q, params.lambda, params.sigma)});
      }
    }
  }
  return m;
}

LabelMap solve_binary(const EnergyModel& model) {
  if (model.n_labels != 2) {
    throw Error(ErrorCode::kInvalidArgument, "solve_binary needs exactly 2 labels");
  }
  const int n = static_cast<int>(model.cell_count());
  const std::int64_t c_scaled = scale_cost(model.params.C);
  MaxFlowGraph g(n, static_cast<int>(model.edges.size()));
  g.add_nodes(n);
  // Source side = label 0.
  for (int p = 0; p < n; ++p) {
    const int d = model.designations.cells[p];
    const std::int64_t cost0 = d == 1 ? c_scaled : 0;
    const std::int64_t cost1 = d == 0 ? c_scaled : 0;
    if (cost0 != 0 || cost1 != 0) g.add_tweights(p, cost1, cost0);
  }
  for (const auto& e : model.edges) {
    const auto w = scale_cost(e.weight);
    g.add_edge(e.p, e.q, w, w);
  }
  g.maxflow();

  LabelMap out;
  out.labels = LabelGrid(model.width, model.height, 0);
  for (int p = 0; p < n; ++p) out.labels.cells[p] = g.in_source_set(p) ? 0 : 1;
  out.energy = model.energy(out.labels);
  return out;
}

LabelMap solve_alpha_expansion(const EnergyModel& model, ExpansionTrace* trace) {
  if (model.n_labels < 1) throw Error(ErrorCode::kInvalidArgument, "no labels");
  if (model.base_index < 0 || model.base_index >= model.n_labels) {
    throw Error(ErrorCode::kInvalidArgument, "base_index out of range");
  }
  const int n = static_cast<int>(model.cell_count());
  const std::int64_t c_scaled = scale_cost(model.params.C);
  std::vector<std::int64_t> weights(model.edges.size());
  for (std::size_t k = 0; k < weights.size(); ++k) weights[k] = scale_cost(model.edges[k].weight);

  auto unary = [&](int p, int label) -> std::int64_t {
    const int d = model.designations.cells[p];
    return (d != kNoDesignation && d != label) ? c_scaled : 0;
  };

  LabelGrid labels(model.width, model.height, model.base_index);
  std::int64_t current = model.scaled_energy(labels);
  if (trace) {
    *trace = {};
    trace->energies.push_back(current);
  }

  MaxFlowGraph g(2 * n, 3 * static_cast<int>(model.edges.size()));
  LabelGrid candidate = labels;
  bool improved = model.n_labels > 1;
  while (improved) {
    improved = false;
    if (trace) ++trace->sweeps;
    for (int alpha = 0; alpha < model.n_labels; ++alpha) {
      // Source side keeps the current label, sink side switches to alpha.
      g.clear();
      g.add_nodes(n);
      for (int p = 0; p < n; ++p) {
        const std::int64_t keep = unary(p, labels.cells[p]);
        const std::int64_t take = unary(p, alpha);
        if (keep != 0 || take != 0) g.add_tweights(p, take, keep);
      }
      for (std::size_t k = 0; k < model.edges.size(); ++k) {
        const auto& e = model.edges[k];
        const int lp = labels.cells[e.p];
        const int lq = labels.cells[e.q];
        const std::int64_t w = weights[k];
        if (lp == lq) {
          if (lp != alpha) g.add_edge(e.p, e.q, w, w);
        } else {
          const int aux = g.add_nodes(1);
          const std::int64_t w_pa = lp != alpha ? w : 0;
          const std::int64_t w_aq = lq != alpha ? w : 0;
          g.add_edge(e.p, aux, w_pa, w_pa);
          g.add_edge(aux, e.q, w_aq, w_aq);
          g.add_tweights(aux, 0, w);
        }
      }
      g.maxflow();

      for (int p = 0; p < n; ++p) candidate.cells[p] = g.in_source_set(p) ? labels.cells[p] : alpha;
      const std::int64_t e = model.scaled_energy(candidate);
      if (e < current) {
        current = e;
        labels.cells.swap(candidate.cells);
        candidate.cells = labels.cells;
        improved = true;
        if (trace) {
          trace->energies.push_back(current);
          ++trace->accepted_moves;
        }
      }
    }
  }

  LabelMap out;
  out.energy = model.energy(labels);
  out.labels = std::move(labels);
  return out;
}

Segmentation segment_reduced(const ReducedFeatures& feats, int image_width, int image_height,
                             const StrokeSet& strokes, const GraphCutParams& params) {
  Segmentation s;
  const auto t0 = Clock::now();
  validate_strokes(strokes, feats.n_images(), image_width, image_height);
  const auto designations =
      rasterize_strokes(strokes, image_width, image_height, feats.width, feats.height);
  s.timing.rasterize_ms = ms_since(t0);

  const auto t1 = Clock::now();
  const EnergyModel model = build_energy(feats, designations, params, strokes.base_index);
  s.timing.energy_ms = ms_since(t1);

  const auto t2 = Clock::now();
  if (model.n_labels == 1) {
    s.labels.labels = LabelGrid(model.width, model.height, 0);
    s.labels.energy = model.energy(s.labels.labels);
  } else if (model.n_labels == 2 && model.base_index == 0) {
    s.labels = solve_binary(model);
  } else {
    s.labels = solve_alpha_expansion(model);
  }
  s.timing.solve_ms = ms_since(t2);
  s.timing.total_ms = ms_since(t0);
  return s;
}

Segmentation segment(const FeatureStack& stack, const StrokeSet& strokes,
                     const FeatureSelection& selection, const GraphCutParams& params) {
  const auto t0 = Clock::now();
  validate_strokes(strokes, stack.n_images(), stack.width(), stack.height());
  const auto grids = select_features(stack, selection);
  const double select_ms = ms_since(t0);

  const auto t1 = Clock::now();
  const PcaModel pca = fit_pca(grids);
  const ReducedFeatures feats = project(pca, grids);
  const double pca_ms = ms_since(t1);

  Segmentation s = segment_reduced(feats, stack.width(), stack.height(), strokes, params);
  s.timing.select_ms = select_ms;
  s.timing.pca_ms = pca_ms;
  s.timing.total_ms = ms_since(t0);
  return s;
}

}  // namespace gpm
