// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gpm/error.hpp"
#include "json.hpp"

namespace gpm {

std::vector<std::size_t> seam_pixels(const LabelGrid& l) {
  std::vector<std::size_t> out;
  for (int y = 0; y < l.height; ++y) {
    for (int x = 0; x < l.width; ++x) {
      const int v = l.at(x, y);
      const bool seam = (x > 0 && l.at(x - 1, y) != v) || (x + 1 < l.width && l.at(x + 1, y) != v) ||
                        (y > 0 && l.at(x, y - 1) != v) || (y + 1 < l.height && l.at(x, y + 1) != v);
      if (seam) out.push_back(static_cast<std::size_t>(y) * l.width + x);
    }
  }
  return out;
}

std::vector<double> luma(const Image8& im) {
  std::vector<double> g(static_cast<std::size_t>(im.width) * im.height);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = (0.299 * im.rgb[3 * i] + 0.587 * im.rgb[3 * i + 1] + 0.114 * im.rgb[3 * i + 2]) / 255.0;
  }
  return g;
}

double sobel_magnitude(std::span<const double> gray, int width, int height, int x, int y) {
  auto px = [&](int xx, int yy) {
    xx = std::clamp(xx, 0, width - 1);
    yy = std::clamp(yy, 0, height - 1);
    return gray[static_cast<std::size_t>(yy) * width + xx];
  };
  const double gx = (px(x + 1, y - 1) + 2 * px(x + 1, y) + px(x + 1, y + 1) -
                     px(x - 1, y - 1) - 2 * px(x - 1, y) - px(x - 1, y + 1)) / 8.0;
  const double gy = (px(x - 1, y + 1) + 2 * px(x, y + 1) + px(x + 1, y + 1) -
                     px(x - 1, y - 1) - 2 * px(x, y - 1) - px(x + 1, y - 1)) / 8.0;
  return std::sqrt(gx * gx + gy * gy);
}

SgScore sg_score(const Image8& image, std::span<const std::size_t> seam) {
  if (seam.empty()) return {0.0, true};
  const auto g = luma(image);
  double sum = 0;
  for (auto p : seam) {
    sum += sobel_magnitude(g, image.width, image.height, static_cast<int>(p % image.width),
                           static_cast<int>(p / image.width));
  }
  return {sum / static_cast<double>(seam.size()), false};
}

SeamReport seam_report(const Image8& blended, std::span<const Image8> stack,
                       const LabelGrid& fullres_labels) {
  if (stack.empty()) throw Error(ErrorCode::kInvalidArgument, "empty stack");
  if (fullres_labels.width != blended.width || fullres_labels.height != blended.height) {
    throw Error(ErrorCode::kShapeMismatch, "labels are not at image resolution");
  }
  const auto seam = seam_pixels(fullres_labels);
  SeamReport r;
  const auto s = sg_score(blended, seam);
  r.sg_score = s.value;
  r.empty_seam = s.empty_seam;
  r.stack_min = std::numeric_limits<double>::infinity();
  r.stack_max = -std::numeric_limits<double>::infinity();
  double sum = 0;
  for (const auto& im : stack) {
    if (!im.same_size(blended)) throw Error(ErrorCode::kShapeMismatch, "stack image size");
    const double v = sg_score(im, seam).value;
    r.stack_min = std::min(r.stack_min, v);
    r.stack_max = std::max(r.stack_max, v);
    sum += v;
  }
  r.stack_avg = sum / static_cast<double>(stack.size());
  // Keep min <= avg <= max under rounding when all values coincide.
  r.stack_avg = std::clamp(r.stack_avg, r.stack_min, r.stack_max);
  return r;
}

Psnr psnr(const Image8& a, const Image8& b) {
  if (!a.same_size(b)) throw Error(ErrorCode::kShapeMismatch, "psnr inputs differ in size");
  double sse = 0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = static_cast<double>(a.rgb[i]) - b.rgb[i];
    sse += d * d;
  }
  if (sse == 0) return {std::numeric_limits<double>::infinity(), true};
  const double mse = sse / static_cast<double>(a.rgb.size());
  return {20.0 * std::log10(255.0 / std::sqrt(mse)), false};
}

namespace {

// Separable Gaussian blur with zero padding; kernel radius = window / 2.
void blur(std::vector<double>& img, int w, int h, std::span<const double> kernel,
          std::vector<double>& tmp) {
  const int r = static_cast<int>(kernel.size()) / 2;
  tmp.assign(img.size(), 0.0);
  for (int y = 0; y < h; ++y) {
    const double* row = &img[static_cast<std::size_t>(y) * w];
    double* out = &tmp[static_cast<std::size_t>(y) * w];
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int k = -r; k <= r; ++k) {
        const int xx = x + k;
        if (xx >= 0 && xx < w) s += kernel[k + r] * row[xx];
      }
      out[x] = s;
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int k = -r; k <= r; ++k) {
        const int yy = y + k;
        if (yy >= 0 && yy < h) s += kernel[k + r] * tmp[static_cast<std::size_t>(yy) * w + x];
      }
      img[static_cast<std::size_t>(y) * w + x] = s;
    }
  }
}

}  // namespace

double masked_ssim(const Image8& blended, std::span<const Image8> stack,
                   const LabelGrid& labels, const SsimOptions& opt) {
  const int w = blended.width;
  const int h = blended.height;
  if (labels.width != w || labels.height != h) {
    throw Error(ErrorCode::kShapeMismatch, "labels are not at image resolution");
  }
  for (const auto& im : stack) {
    if (!im.same_size(blended)) throw Error(ErrorCode::kShapeMismatch, "stack image size");
  }
  for (int v : labels.cells) {
    if (v < 0 || v >= static_cast<int>(stack.size())) {
      throw Error(ErrorCode::kInvalidArgument, "label out of range");
    }
  }

  const int r = opt.window / 2;
  std::vector<double> kernel(static_cast<std::size_t>(2 * r + 1));
  double ksum = 0;
  for (int k = -r; k <= r; ++k) {
    kernel[k + r] = std::exp(-(k * k) / (2.0 * opt.gaussian_sigma * opt.gaussian_sigma));
    ksum += kernel[k + r];
  }
  for (auto& k : kernel) k /= ksum;
  const double c1 = std::pow(opt.k1 * opt.dynamic_range, 2);
  const double c2 = std::pow(opt.k2 * opt.dynamic_range, 2);

  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<double> m(n), mx(n), my(n), mxx(n), myy(n), mxy(n), tmp;
  double weighted_sum = 0;
  std::size_t total_area = 0;

  for (int region = 0; region < static_cast<int>(stack.size()); ++region) {
    std::size_t area = 0;
    for (std::size_t i = 0; i < n; ++i) area += labels.cells[i] == region;
    if (area == 0) continue;

    double region_sum = 0;
    for (int c = 0; c < 3; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        const double in = labels.cells[i] == region ? 1.0 : 0.0;
        const double x = in * blended.rgb[3 * i + c];
        const double y = in * stack[region].rgb[3 * i + c];
        m[i] = in;
        mx[i] = x;
        my[i] = y;
        mxx[i] = x * blended.rgb[3 * i + c];
        myy[i] = y * stack[region].rgb[3 * i + c];
        mxy[i] = x * stack[region].rgb[3 * i + c];
      }
      for (auto* v : {&m, &mx, &my, &mxx, &myy, &mxy}) blur(*v, w, h, kernel, tmp);
      for (std::size_t i = 0; i < n; ++i) {
        if (labels.cells[i] != region) continue;
        const double wsum = m[i];
        const double ux = mx[i] / wsum;
        const double uy = my[i] / wsum;
        const double vx = mxx[i] / wsum - ux * ux;
        const double vy = myy[i] / wsum - uy * uy;
        const double cxy = mxy[i] / wsum - ux * uy;
        region_sum += ((2 * ux * uy + c1) * (2 * cxy + c2)) /
                      ((ux * ux + uy * uy + c1) * (vx + vy + c2));
      }
    }
    weighted_sum += region_sum / 3.0;
    total_area += area;
  }
  return weighted_sum / static_cast<double>(total_area);
}

MetricsReport evaluate(const Image8& blended, std::span<const Image8> stack,
                       const LabelGrid& fullres_labels) {
  MetricsReport rep;
  rep.seam = seam_report(blended, stack, fullres_labels);
  Image8 hard(blended.width, blended.height);
  for (int y = 0; y < blended.height; ++y) {
    for (int x = 0; x < blended.width; ++x) {
      const int l = fullres_labels.at(x, y);
      for (int c = 0; c < 3; ++c) hard.at(x, y, c) = stack[l].at(x, y, c);
    }
  }
  rep.fidelity.psnr = psnr(blended, hard);
  rep.fidelity.masked_ssim = masked_ssim(blended, stack, fullres_labels);
  return rep;
}

std::string metrics_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["sg"] = {{"score", r.seam.sg_score},
             {"stack_min", r.seam.stack_min},
             {"stack_avg", r.seam.stack_avg},
             {"stack_max", r.seam.stack_max},
             {"empty_seam", r.seam.empty_seam}};
  if (r.fidelity.psnr.infinite) {
    j["psnr_db"] = nullptr;
  } else {
    j["psnr_db"] = r.fidelity.psnr.db;
  }
  j["psnr_infinite"] = r.fidelity.psnr.infinite;
  j["masked_ssim"] = r.fidelity.masked_ssim;
  return j.dump(2);
}

}  // namespace gpm
