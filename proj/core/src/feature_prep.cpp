// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpm/feature_prep.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <filesystem>

#include "gpm/error.hpp"
#include "json.hpp"

namespace gpm {

std::string FeatureSelection::key() const {
  std::string k = std::string(to_string(source)) + "|" + layer + "|";
  if (timestep_mode == TimestepMode::kFinal) {
    k += "final";
  } else {
    k += "average_from:" + std::to_string(average_from);
  }
  return k;
}

FeatureGrid flatten_heads(const AttentionTensor& t) {
  FeatureGrid g;
  g.width = t.width;
  g.height = t.height;
  g.dim = t.heads * t.dim;
  g.values.resize(static_cast<std::size_t>(g.width) * g.height * g.dim);
  for (int y = 0; y < t.height; ++y) {
    for (int x = 0; x < t.width; ++x) {
      auto out = g.cell(x, y);
      for (int h = 0; h < t.heads; ++h) {
        const float* src = &t.values[t.index(h, y, x, 0)];
        std::copy(src, src + t.dim, out.begin() + static_cast<std::ptrdiff_t>(h) * t.dim);
      }
    }
  }
  return g;
}

std::vector<FeatureGrid> select_features(const FeatureStack& stack, const FeatureSelection& sel) {
  const auto& m = stack.manifest();
  const LayerRecord* layer = sel.layer.empty() ? &m.segmentation_layer() : m.find_layer(sel.layer);
  if (layer == nullptr) throw Error(ErrorCode::kLayerNotFound, sel.layer);

  std::vector<int> steps;
  if (sel.timestep_mode == TimestepMode::kFinal) {
    steps.push_back(m.timesteps.back());
  } else {
    for (int t : m.timesteps) {
      if (t >= sel.average_from) steps.push_back(t);
    }
    if (steps.empty()) {
      throw Error(ErrorCode::kTimestepNotFound,
                  "no timestep >= " + std::to_string(sel.average_from));
    }
  }

  std::vector<FeatureGrid> out;
  out.reserve(static_cast<std::size_t>(m.n_images));
  for (int i = 0; i < m.n_images; ++i) {
    if (steps.size() == 1) {
      out.push_back(flatten_heads(stack.tensor(i, layer->id, steps[0], sel.source)));
      continue;
    }
    std::vector<double> sum;
    FeatureGrid acc;
    for (int t : steps) {
      FeatureGrid g = flatten_heads(stack.tensor(i, layer->id, t, sel.source));
      if (sum.empty()) {
        sum.assign(g.values.size(), 0.0);
        acc = std::move(g);
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] = acc.values[k];
      } else {
        for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += g.values[k];
      }
    }
    const double n = static_cast<double>(steps.size());
    for (std::size_t k = 0; k < sum.size(); ++k) acc.values[k] = static_cast<float>(sum[k] / n);
    out.push_back(std::move(acc));
  }
  return out;
}

namespace {

void normalize_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (v[best] < 0) v = -v;
}

}  // namespace

PcaModel fit_pca(std::span<const FeatureGrid> grids) {
  if (grids.empty()) throw Error(ErrorCode::kInvalidArgument, "no feature grids");
  const int dim = grids[0].dim;
  std::size_t n = 0;
  for (const auto& g : grids) {
    if (g.dim != dim) throw Error(ErrorCode::kDimensionMismatch, "grids disagree on feature dim");
    n += static_cast<std::size_t>(g.width) * g.height;
  }
  if (n < static_cast<std::size_t>(kPcaComponents)) {
    throw Error(ErrorCode::kInvalidArgument, "PCA needs at least 10 samples, got " + std::to_string(n));
  }

  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), dim);
  Eigen::Index row = 0;
  for (const auto& g : grids) {
    const std::size_t cells = static_cast<std::size_t>(g.width) * g.height;
    for (std::size_t c = 0; c < cells; ++c, ++row) {
      const float* src = g.values.data() + c * dim;
      for (int d = 0; d < dim; ++d) x(row, d) = src[d];
    }
  }

  PcaModel model;
  model.mean = x.colwise().mean().transpose();
  x.rowwise() -= model.mean.transpose();
  const int k = std::min(kPcaComponents, dim);

  if ((x.array() == 0.0).all()) {
    model.degenerate = true;
    model.basis = Eigen::MatrixXd::Identity(dim, k);
    model.explained_variance = Eigen::VectorXd::Zero(k);
    return model;
  }

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(dim, dim);
  cov.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose(), 1.0 / static_cast<double>(n - 1));
  cov = cov.selfadjointView<Eigen::Lower>();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::kDegenerateData, "eigendecomposition did not converge");
  }
  // Eigen returns ascending eigenvalues.
  model.basis.resize(dim, k);
  model.explained_variance.resize(k);
  for (int j = 0; j < k; ++j) {
    const Eigen::Index src = dim - 1 - j;
    model.explained_variance[j] = std::max(0.0, solver.eigenvalues()[src]);
    model.basis.col(j) = solver.eigenvectors().col(src);
    normalize_sign(model.basis.col(j));
  }
  return model;
}

Eigen::VectorXd project_one(const PcaModel& model, std::span<const float> x) {
  if (static_cast<int>(x.size()) != model.input_dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "feature dim " + std::to_string(x.size()) +
                                                   " vs model dim " + std::to_string(model.input_dim()));
  }
  Eigen::VectorXd centered(model.input_dim());
  for (int d = 0; d < model.input_dim(); ++d) centered[d] = static_cast<double>(x[d]) - model.mean[d];
  return model.basis.transpose() * centered;
}

ReducedFeatures project(const PcaModel& model, std::span<const FeatureGrid> grids) {
  ReducedFeatures out;
  if (grids.empty()) return out;
  out.width = grids[0].width;
  out.height = grids[0].height;
  out.components = model.components();
  const Eigen::MatrixXd basis_t = model.basis.transpose();
  for (const auto& g : grids) {
    if (g.width != out.width || g.height != out.height) {
      throw Error(ErrorCode::kShapeMismatch, "grids disagree on (w, h)");
    }
    if (g.dim != model.input_dim()) {
      throw Error(ErrorCode::kDimensionMismatch, "feature dim " + std::to_string(g.dim) +
                                                     " vs model dim " + std::to_string(model.input_dim()));
    }
    const auto cells = static_cast<Eigen::Index>(g.width) * g.height;
    Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> raw(
        g.values.data(), cells, g.dim);
    Eigen::MatrixXd centered = raw.cast<double>();
    centered.rowwise() -= model.mean.transpose();
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> reduced =
        centered * model.basis;
    out.grids.emplace_back(reduced.data(), reduced.data() + reduced.size());
  }
  return out;
}

void save_pca(const std::filesystem::path& path, const PcaModel& model) {
  nlohmann::json j;
  j["dim"] = model.input_dim();
  j["components"] = model.components();
  j["degenerate"] = model.degenerate;
  j["mean"] = std::vector<double>(model.mean.data(), model.mean.data() + model.mean.size());
  j["explained_variance"] = std::vector<double>(
      model.explained_variance.data(), model.explained_variance.data() + model.explained_variance.size());
  auto& cols = j["basis"] = nlohmann::json::array();
  for (Eigen::Index c = 0; c < model.basis.cols(); ++c) {
    cols.push_back(std::vector<double>(model.basis.col(c).data(), model.basis.col(c).data() + model.basis.rows()));
  }
  const std::string text = j.dump();
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

PcaModel load_pca(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    const auto j = nlohmann::json::parse(bytes.begin(), bytes.end());
    PcaModel m;
    const int d = j.at("dim").get<int>();
    const int k = j.at("components").get<int>();
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto var = j.at("explained_variance").get<std::vector<double>>();
    const auto basis = j.at("basis").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(mean.size()) != d || static_cast<int>(var.size()) != k ||
        static_cast<int>(basis.size()) != k) {
      throw Error(ErrorCode::kShapeMismatch, "inconsistent cached PCA model " + path.string());
    }
    m.degenerate = j.at("degenerate").get<bool>();
    m.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), d);
    m.explained_variance = Eigen::Map<const Eigen::VectorXd>(var.data(), k);
    m.basis.resize(d, k);
    for (int c = 0; c < k; ++c) {
      if (static_cast<int>(basis[c].size()) != d) {
        throw Error(ErrorCode::kShapeMismatch, "inconsistent cached PCA model " + path.string());
      }
      m.basis.col(c) = Eigen::Map<const Eigen::VectorXd>(basis[c].data(), d);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kBadManifest, path.string() + ": " + e.what());
  }
}

}  // namespace gpm
