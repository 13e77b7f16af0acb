// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "gpm/compositor.hpp"
#include "gpm/error.hpp"

namespace gpm {

namespace {

constexpr int kDx[4] = {1, -1, 0, 0};
constexpr int kDy[4] = {0, 0, 1, -1};

struct Problem {
  int width;
  int height;
  const PixelComposite& comp;
  std::span<const Image8> images;
  int base;

  bool unknown(int x, int y) const { return comp.fullres_labels.at(x, y) != base; }

  // Guidance g(p -> q) for channel c, p unknown.
  double guidance(int px, int py, int qx, int qy, int c) const {
    const int a = comp.fullres_labels.at(px, py);
    const int b = comp.fullres_labels.at(qx, qy);
    const double ga = double(images[a].at(px, py, c)) - images[a].at(qx, qy, c);
    if (a == b || b == base) return ga;
    const double gb = double(images[b].at(px, py, c)) - images[b].at(qx, qy, c);
    return 0.5 * (ga + gb);
  }
};

}  // namespace

double guidance_residual(std::span<const double> values, const PixelComposite& composite,
                         std::span<const Image8> images, int base_index) {
  const int w = composite.image.width;
  const int h = composite.image.height;
  const Problem pb{w, h, composite, images, base_index};
  double sum = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int k : {0, 2}) {  // right and down neighbours: each edge once
        const int qx = x + kDx[k];
        const int qy = y + kDy[k];
        if (qx >= w || qy >= h) continue;
        const bool pu = pb.unknown(x, y);
        const bool qu = pb.unknown(qx, qy);
        if (!pu && !qu) continue;
        for (int c = 0; c < 3; ++c) {
          const double fp = values[(static_cast<std::size_t>(y) * w + x) * 3 + c];
          const double fq = values[(static_cast<std::size_t>(qy) * w + qx) * 3 + c];
          const double g = pu ? pb.guidance(x, y, qx, qy, c) : -pb.guidance(qx, qy, x, y, c);
          const double r = fp - fq - g;
          sum += r * r;
        }
      }
    }
  }
  return sum;
}

PoissonResult poisson_blend(const PixelComposite& composite, std::span<const Image8> images,
                            int base_index, const PoissonOptions& options) {
  const int w = composite.image.width;
  const int h = composite.image.height;
  if (base_index < 0 || base_index >= static_cast<int>(images.size())) {
    throw Error(ErrorCode::kInvalidArgument, "base_index out of range");
  }
  for (const auto& im : images) {
    if (im.width != w || im.height != h) throw Error(ErrorCode::kShapeMismatch, "stack image size");
  }

  PoissonResult res;
  res.solution.assign(composite.image.rgb.begin(), composite.image.rgb.end());
  res.image = composite.image;

  const Problem pb{w, h, composite, images, base_index};
  std::vector<int> index(static_cast<std::size_t>(w) * h, -1);
  std::vector<int> unknowns;
  bool has_base = false;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t p = static_cast<std::size_t>(y) * w + x;
      if (pb.unknown(x, y)) {
        index[p] = static_cast<int>(unknowns.size());
        unknowns.push_back(static_cast<int>(p));
      } else {
        has_base = true;
      }
    }
  }
  if (unknowns.empty()) return res;
  if (!has_base) {
    res.fell_back = true;
    res.warning = std::string(to_string(ErrorCode::kNoBoundary)) +
                  ": no base pixels to anchor the solve; returning the hard composite";
    return res;
  }

  const std::size_t n = unknowns.size();
  std::vector<std::uint8_t> degree(n);
  for (std::size_t u = 0; u < n; ++u) {
    const int x = unknowns[u] % w;
    const int y = unknowns[u] / w;
    int d = 0;
    for (int k = 0; k < 4; ++k) {
      const int qx = x + kDx[k];
      const int qy = y + kDy[k];
      if (qx >= 0 && qy >= 0 && qx < w && qy < h) ++d;
    }
    degree[u] = static_cast<std::uint8_t>(d);
  }

  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (std::size_t u = 0; u < n; ++u) {
      const int x = unknowns[u] % w;
      const int y = unknowns[u] / w;
      double s = degree[u] * v[u];
      for (int k = 0; k < 4; ++k) {
        const int qx = x + kDx[k];
        const int qy = y + kDy[k];
        if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
        const int qi = index[static_cast<std::size_t>(qy) * w + qx];
        if (qi >= 0) s -= v[qi];
      }
      out[u] = s;
    }
  };
  auto dot = [n](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
  };

  std::vector<double> b(n), x(n), r(n), p(n), ap(n);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t u = 0; u < n; ++u) {
      const int px = unknowns[u] % w;
      const int py = unknowns[u] / w;
      double rhs = 0;
      for (int k = 0; k < 4; ++k) {
        const int qx = px + kDx[k];
        const int qy = py + kDy[k];
        if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
        rhs += pb.guidance(px, py, qx, qy, c);
        if (!pb.unknown(qx, qy)) rhs += composite.image.at(qx, qy, c);
      }
      b[u] = rhs;
      x[u] = composite.image.at(px, py, c);
    }

    apply(x, ap);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
    p = r;
    double rr = dot(r, r);
    const double bnorm = std::sqrt(dot(b, b));
    const double target = options.relative_tolerance * (bnorm > 0 ? bnorm : 1.0);
    int it = 0;
    while (std::sqrt(rr) > target && it < options.max_iterations) {
      apply(p, ap);
      const double alpha = rr / dot(p, ap);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * ap[i];
      }
      const double rr_new = dot(r, r);
      const double beta = rr_new / rr;
      rr = rr_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
      ++it;
    }
    res.iterations = std::max(res.iterations, it);
    res.relative_residual =
        std::max(res.relative_residual, std::sqrt(rr) / (bnorm > 0 ? bnorm : 1.0));

    for (std::size_t u = 0; u < n; ++u) {
      const std::size_t off = static_cast<std::size_t>(unknowns[u]) * 3 + c;
      res.solution[off] = x[u];
      res.image.rgb[off] = static_cast<std::uint8_t>(std::clamp(std::lround(x[u]), 0L, 255L));
    }
  }
  return res;
}

}  // namespace gpm
