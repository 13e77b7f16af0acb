// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpm_app/repository.hpp"

#include <unistd.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "gpm/error.hpp"
#include "gpm_app/stroke_json.hpp"

namespace gpm::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ull;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ull;

void fnv_update(std::uint64_t& h, std::span<const std::uint8_t> bytes) {
  for (auto b : bytes) {
    h ^= b;
    h *= kFnvPrime;
  }
}

void fnv_update(std::uint64_t& h, std::string_view s) {
  fnv_update(h, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string read_text(const fs::path& p) {
  const auto bytes = read_file_bytes(p);
  return {bytes.begin(), bytes.end()};
}

void write_text(const fs::path& p, std::string_view text) {
  write_file_bytes(p, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// Manifest-relative paths must stay inside the stack directory.
fs::path checked_relative(const std::string& rel) {
  const fs::path p(rel);
  if (rel.empty() || p.is_absolute()) {
    throw Error(ErrorCode::kBadManifest, "file path must be relative: '" + rel + "'");
  }
  for (const auto& part : p) {
    if (part == "..") throw Error(ErrorCode::kBadManifest, "file path leaves the stack: '" + rel + "'");
  }
  return p;
}

std::vector<std::string> referenced_files(const StackManifest& m) {
  std::vector<std::string> files = m.image_files;
  for (const auto& [key, rel] : m.tensor_files) files.push_back(rel);
  return files;
}

bool is_stack_id(const std::string& id) {
  if (id.size() != 16) return false;
  for (char c : id) {
    if (!((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'))) return false;
  }
  return true;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

fs::path default_data_dir() {
  if (const char* env = std::getenv("GPM_DATA_DIR"); env != nullptr && *env != '\0') return env;
  return "gpm-data";
}

std::string compute_stack_id(const fs::path& manifest_path) {
  const std::string text = read_text(manifest_path);
  const StackManifest m = parse_manifest(text);
  std::uint64_t h = kFnvOffset;
  fnv_update(h, text);
  for (const auto& rel : referenced_files(m)) {
    fnv_update(h, rel);
    fnv_update(h, read_file_bytes(manifest_path.parent_path() / checked_relative(rel)));
  }
  return hex64(h);
}

struct StackRepository::Entry {
  std::mutex mu;
  std::shared_ptr<const FeatureStack> stack;
  std::map<std::string, std::shared_ptr<const ReducedFeatures>> features;
  std::optional<SessionState> session;
  std::optional<SegmentationResult> latest;
};

StackRepository::StackRepository(fs::path data_root, EngineConfig config)
    : root_(std::move(data_root)), config_(std::move(config)) {
  fs::create_directories(root_ / "stacks");
}

StackRepository::~StackRepository() = default;

fs::path StackRepository::stack_dir(const std::string& id) const { return root_ / "stacks" / id; }

bool StackRepository::contains(const std::string& id) const {
  return is_stack_id(id) && fs::exists(stack_dir(id) / "manifest.json");
}

std::string StackRepository::ingest(const fs::path& manifest_path) {
  // Full validation before anything lands in the data root.
  FeatureStack::load(manifest_path);
  const std::string id = compute_stack_id(manifest_path);
  const fs::path dst = stack_dir(id);
  if (fs::exists(dst / "manifest.json")) return id;

  static std::atomic<int> counter{0};
  const fs::path tmp = root_ / "stacks" /
                       (id + ".partial-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  const fs::path src = manifest_path.parent_path();
  const StackManifest m = parse_manifest(read_text(manifest_path));
  fs::copy_file(manifest_path, tmp / "manifest.json");
  for (const auto& rel : referenced_files(m)) {
    const fs::path p = checked_relative(rel);
    fs::create_directories((tmp / p).parent_path());
    fs::copy_file(src / p, tmp / p, fs::copy_options::overwrite_existing);
  }
  std::error_code ec;
  fs::rename(tmp, dst, ec);
  if (ec) {
    // Lost a race with an identical ingest.
    fs::remove_all(tmp);
    if (!fs::exists(dst / "manifest.json")) throw Error(ErrorCode::kIo, "cannot store stack " + id);
  }
  return id;
}

StackRepository::Entry& StackRepository::entry(const std::string& id) {
  std::lock_guard lock(mu_);
  auto it = entries_.find(id);
  if (it != entries_.end()) return *it->second;
  if (!contains(id)) throw NotFound("unknown stack '" + id + "'");
  return *entries_.emplace(id, std::make_unique<Entry>()).first->second;
}

namespace {

std::shared_ptr<const FeatureStack> load_locked(std::shared_ptr<const FeatureStack>& slot,
                                                const fs::path& dir) {
  if (!slot) slot = std::make_shared<const FeatureStack>(FeatureStack::load(dir / "manifest.json"));
  return slot;
}

SessionState& session_locked(std::optional<SessionState>& slot, const fs::path& dir) {
  if (slot) return *slot;
  SessionState s;
  const fs::path file = dir / "session.json";
  if (fs::exists(file)) {
    const json j = json::parse(read_text(file));
    s.version = j.at("version").get<std::uint64_t>();
    s.strokes = parse_stroke_set(j.at("strokes").dump());
  }
  slot = std::move(s);
  return *slot;
}

}  // namespace

std::shared_ptr<const FeatureStack> StackRepository::stack(const std::string& id) {
  Entry& e = entry(id);
  std::lock_guard lock(e.mu);
  return load_locked(e.stack, stack_dir(id));
}

std::shared_ptr<const ReducedFeatures> StackRepository::features(const std::string& id,
                                                                 double* pca_ms) {
  Entry& e = entry(id);
  std::lock_guard lock(e.mu);
  const std::string key = config_.selection.key();
  if (pca_ms) *pca_ms = 0;
  if (auto it = e.features.find(key); it != e.features.end()) return it->second;

  const auto t0 = std::chrono::steady_clock::now();
  const auto st = load_locked(e.stack, stack_dir(id));
  const auto grids = select_features(*st, config_.selection);
  std::uint64_t h = kFnvOffset;
  fnv_update(h, key);
  const fs::path cache = stack_dir(id) / "pca" / (hex64(h) + ".json");
  std::optional<PcaModel> model;
  if (fs::exists(cache)) {
    model = load_pca(cache);
    if (model->input_dim() != grids.front().dim) model.reset();
  }
  if (!model) {
    model = fit_pca(grids);
    fs::create_directories(cache.parent_path());
    save_pca(cache, *model);
  }
  auto reduced = std::make_shared<const ReducedFeatures>(project(*model, grids));
  e.features.emplace(key, reduced);
  if (pca_ms) *pca_ms = ms_since(t0);
  return reduced;
}

void StackRepository::save_session(const std::string& id, const SessionState& s) const {
  json j;
  j["version"] = s.version;
  j["strokes"] = json::parse(stroke_set_to_json(s.strokes));
  const fs::path file = stack_dir(id) / "session.json";
  const fs::path tmp = stack_dir(id) / "session.json.tmp";
  write_text(tmp, j.dump(2));
  fs::rename(tmp, file);
}

SessionState StackRepository::session(const std::string& id) {
  Entry& e = entry(id);
  std::lock_guard lock(e.mu);
  return session_locked(e.session, stack_dir(id));
}

std::uint64_t StackRepository::put_strokes(const std::string& id, std::uint64_t expected_version,
                                           StrokeSet strokes) {
  Entry& e = entry(id);
  std::lock_guard lock(e.mu);
  const auto st = load_locked(e.stack, stack_dir(id));
  validate_strokes(strokes, st->n_images(), st->width(), st->height());
  SessionState& s = session_locked(e.session, stack_dir(id));
  if (expected_version != s.version) {
    throw VersionConflict("expected_version " + std::to_string(expected_version) +
                          " is stale; current version is " + std::to_string(s.version));
  }
  SessionState next{s.version + 1, std::move(strokes)};
  save_session(id, next);
  s = std::move(next);
  e.latest.reset();
  return s.version;
}

SegmentationResult StackRepository::segmentation(const std::string& id,
                                                 std::optional<std::uint64_t> version) {
  double pca_ms = 0;
  const auto feats = features(id, &pca_ms);
  Entry& e = entry(id);
  std::lock_guard lock(e.mu);
  const SessionState& s = session_locked(e.session, stack_dir(id));
  if (version && *version != s.version) {
    throw VersionConflict("version " + std::to_string(*version) + " is not current (" +
                          std::to_string(s.version) + ")");
  }
  if (e.latest && e.latest->version == s.version) return *e.latest;
  const auto st = load_locked(e.stack, stack_dir(id));
  Segmentation seg = segment_reduced(*feats, st->width(), st->height(), s.strokes, config_.params);
  seg.timing.pca_ms = pca_ms;
  e.latest = SegmentationResult{s.version, std::move(seg.labels), seg.timing};
  return *e.latest;
}

Image8 StackRepository::preview(const std::string& id) {
  const auto seg = segmentation(id);
  return pixel_composite(*stack(id), seg.labels.labels).image;
}

fs::path StackRepository::export_current(const std::string& id) {
  const auto seg = segmentation(id);
  const auto s = session(id);
  const fs::path out = stack_dir(id) / "exports" / ("v" + std::to_string(seg.version));
  export_bundle(*stack(id), seg.labels.labels,
                {id, s.strokes.base_index, config_.params, config_.selection.key()}, out);
  return out;
}

MetricsReport StackRepository::metrics(const std::string& id, const std::string& blended) {
  const auto seg = segmentation(id);
  const auto st = stack(id);
  const auto comp = pixel_composite(*st, seg.labels.labels);
  Image8 image;
  if (blended.empty() || blended == "preview") {
    image = comp.image;
  } else if (blended == "poisson") {
    image = poisson_blend(comp, st->images(), session(id).strokes.base_index).image;
  } else {
    image = read_png(blended);
  }
  if (!image.same_size(comp.image)) throw Error(ErrorCode::kImageSizeMismatch, "blended image size");
  return evaluate(image, st->images(), comp.fullres_labels);
}

}  // namespace gpm::app
