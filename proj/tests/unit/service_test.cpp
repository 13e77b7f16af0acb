// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <chrono>
#include <iterator>
#include <json.hpp>
#include <thread>

#include "fixtures.hpp"
#include "gpm_app/http_service.hpp"
#include "gpm_app/repository.hpp"
#include "gpm_app/stroke_json.hpp"

#include <httplib.h>

namespace gpm::app {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using gpm::testing::error_code_of;

TEST(StrokeJsonTest, RoundTrip) {
  StrokeSet set;
  set.base_index = 2;
  set.strokes.push_back({1, {{1.5, 2}, {3, 4.25}}, 3.0});
  set.strokes.push_back({0, {{0, 0}}, 1.0});
  EXPECT_EQ(parse_stroke_set(stroke_set_to_json(set)), set);
}

TEST(StrokeJsonTest, DefaultsAndFieldErrors) {
  const auto s = parse_stroke_set(R"({"strokes":[{"image_index":1,"points":[[1,2]]}]})");
  EXPECT_EQ(s.base_index, 0);
  EXPECT_EQ(s.strokes[0].radius, 1.0);
  EXPECT_TRUE(parse_stroke_set("{}").strokes.empty());

  try {
    parse_stroke_set(R"({"strokes":[{"image_index":1,"points":[[1,2],[3]]}]})");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kInvalidArgument);
    EXPECT_NE(std::string(e.what()).find("strokes[0].points[1]"), std::string::npos);
  }
  EXPECT_EQ(error_code_of([] { parse_stroke_set("not json"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_code_of([] { parse_stroke_set(R"({"strokes":[{"points":[]}]})"); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_code_of([] { parse_stroke_set(R"({"base_index":"x"})"); }), ErrorCode::kInvalidArgument);
}

TEST(AddressTest, Parses) {
  EXPECT_EQ(parse_address("127.0.0.1:8080"), std::make_pair(std::string("127.0.0.1"), 8080));
  EXPECT_EQ(error_code_of([] { parse_address("localhost"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_code_of([] { parse_address("h:99999"); }), ErrorCode::kInvalidArgument);
  EXPECT_EQ(error_code_of([] { parse_address("h:12x"); }), ErrorCode::kInvalidArgument);
}

StrokeSet two_region_strokes() {
  StrokeSet set;
  set.strokes.push_back({0, {{4, 30}, {20, 30}}, 2.0});
  set.strokes.push_back({2, {{50, 10}, {50, 50}}, 2.0});
  return set;
}

class RepositoryTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = gpm::testing::temp_dir("repo");
    manifest_ = gpm::testing::write_stack({}, dir_ / "src");
  }
  fs::path dir_, manifest_;
};

TEST_F(RepositoryTest, IngestIsIdempotentAndContentAddressed) {
  StackRepository repo(dir_ / "data");
  const auto id = repo.ingest(manifest_);
  EXPECT_EQ(id.size(), 16u);
  EXPECT_EQ(repo.ingest(manifest_), id);
  EXPECT_TRUE(repo.contains(id));
  EXPECT_FALSE(repo.contains("../../etc"));
  EXPECT_EQ(repo.stack(id)->images(), FeatureStack::load(manifest_).images());

  gpm::testing::FixtureOptions other;
  other.seed = 9;
  EXPECT_NE(repo.ingest(gpm::testing::write_stack(other, dir_ / "src2")), id);
  EXPECT_THROW(repo.stack("0123456789abcdef"), NotFound);
}

TEST_F(RepositoryTest, IngestRejectsInvalidStacks) {
  StackRepository repo(dir_ / "data");
  fs::remove(dir_ / "src" / "tensors" / "2_enc0_1_K.gpmt");
  EXPECT_EQ(error_code_of([&] { repo.ingest(manifest_); }), ErrorCode::kMissingTensor);
  EXPECT_TRUE(fs::is_empty(dir_ / "data" / "stacks"));
}

TEST_F(RepositoryTest, VersionedStrokeSessions) {
  StackRepository repo(dir_ / "data");
  const auto id = repo.ingest(manifest_);
  EXPECT_EQ(repo.session(id).version, 0u);
  // No strokes yet: all base.
  EXPECT_EQ(repo.segmentation(id).labels.labels, LabelGrid(8, 8, 0));

  EXPECT_EQ(repo.put_strokes(id, 0, two_region_strokes()), 1u);
  EXPECT_THROW(repo.put_strokes(id, 0, StrokeSet{}), VersionConflict);
  EXPECT_EQ(repo.session(id).strokes, two_region_strokes());

  StrokeSet bad;
  bad.strokes.push_back({0, {{64, 0}}, 1.0});
  EXPECT_EQ(error_code_of([&] { repo.put_strokes(id, 1, bad); }), ErrorCode::kInvalidStroke);
  EXPECT_EQ(repo.session(id).version, 1u);

  const auto seg = repo.segmentation(id, 1);
  EXPECT_EQ(seg.version, 1u);
  EXPECT_EQ(seg.labels.labels.at(0, 3), 0);
  EXPECT_EQ(seg.labels.labels.at(6, 3), 2);
  EXPECT_THROW(repo.segmentation(id, 0), VersionConflict);

  // Sessions and PCA survive a restart.
  StackRepository again(dir_ / "data");
  EXPECT_EQ(again.session(id).version, 1u);
  EXPECT_EQ(again.segmentation(id).labels.labels, seg.labels.labels);
  EXPECT_FALSE(fs::is_empty(again.stack_dir(id) / "pca"));
}

TEST_F(RepositoryTest, FeaturesAreCachedPerSelection) {
  StackRepository repo(dir_ / "data");
  const auto id = repo.ingest(manifest_);
  const auto a = repo.features(id);
  EXPECT_EQ(repo.features(id).get(), a.get());

  EngineConfig cfg;
  cfg.selection.source = Projection::kV;
  StackRepository other(dir_ / "data", cfg);
  const auto b = other.features(id);
  EXPECT_NE(b->grids, a->grids);
  EXPECT_EQ(std::distance(fs::directory_iterator(repo.stack_dir(id) / "pca"), fs::directory_iterator{}), 2);
}

TEST_F(RepositoryTest, PreviewExportAndMetrics) {
  StackRepository repo(dir_ / "data");
  const auto id = repo.ingest(manifest_);
  EXPECT_EQ(repo.preview(id), repo.stack(id)->images()[0]);
  repo.put_strokes(id, 0, two_region_strokes());
  const auto path = repo.export_current(id);
  EXPECT_TRUE(fs::exists(path / "bundle.json"));
  EXPECT_EQ(repo.metrics(id, "preview").fidelity.masked_ssim, 1.0);
  const auto poisson = repo.metrics(id, "poisson");
  EXPECT_FALSE(poisson.fidelity.psnr.infinite);
  EXPECT_NE(poisson.seam.sg_score, repo.metrics(id, "preview").seam.sg_score);
}

// ---- HTTP ------------------------------------------------------------------

class HttpTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = gpm::testing::temp_dir("http");
    manifest_ = gpm::testing::write_stack({}, dir_ / "src");
    repo_ = std::make_unique<StackRepository>(dir_ / "data");
    service_ = std::make_unique<HttpService>(*repo_);
    port_ = service_->bind("127.0.0.1", 0);
    ASSERT_GT(port_, 0);
    thread_ = std::thread([this] { service_->listen(); });
    service_->wait_until_ready();
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
  }
  void TearDown() override {
    service_->stop();
    thread_.join();
  }

  std::string upload() {
    const auto m = FeatureStack::load(manifest_).manifest();
    httplib::MultipartFormDataItems items;
    auto add = [&](const std::string& name, const fs::path& file) {
      const auto bytes = read_file_bytes(file);
      items.push_back({name, std::string(bytes.begin(), bytes.end()), file.filename().string(),
                       "application/octet-stream"});
    };
    add("manifest", manifest_);
    for (const auto& f : m.image_files) add(f, dir_ / "src" / f);
    for (const auto& [k, f] : m.tensor_files) add(f, dir_ / "src" / f);
    auto res = client_->Post("/v1/stacks", items);
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, 201) << res->body;
    return json::parse(res->body)["stack_id"];
  }

  httplib::Result put_strokes(const std::string& id, std::uint64_t expected, const StrokeSet& s) {
    auto body = json::parse(stroke_set_to_json(s));
    body["expected_version"] = expected;
    return client_->Put("/v1/stacks/" + id + "/strokes", body.dump(), "application/json");
  }

  fs::path dir_, manifest_;
  std::unique_ptr<StackRepository> repo_;
  std::unique_ptr<HttpService> service_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
  int port_ = 0;
};

TEST_F(HttpTest, UploadAndSummary) {
  const auto id = upload();
  EXPECT_EQ(id, compute_stack_id(manifest_));
  auto res = client_->Get("/v1/stacks/" + id);
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 200);
  const auto j = json::parse(res->body);
  EXPECT_EQ(j["n_images"], 3);
  EXPECT_EQ(j["segmentation_grid"]["width"], 8);
  EXPECT_EQ(j["version"], 0);
  EXPECT_EQ(client_->Get("/v1/stacks/0123456789abcdef")->status, 404);
}

TEST_F(HttpTest, StrokesThenSegmentationHonoursDesignations) {
  const auto id = upload();
  const auto t0 = std::chrono::steady_clock::now();
  auto put = put_strokes(id, 0, two_region_strokes());
  ASSERT_EQ(put->status, 200) << put->body;
  EXPECT_EQ(json::parse(put->body)["version"], 1);
  auto seg = client_->Get("/v1/stacks/" + id + "/segmentation?version=1");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ASSERT_EQ(seg->status, 200);
  EXPECT_EQ(seg->get_header_value("Content-Type"), "image/png");
  EXPECT_FALSE(seg->get_header_value("X-GPM-Energy").empty());
  const auto labels = decode_label_png(std::span(reinterpret_cast<const std::uint8_t*>(seg->body.data()), seg->body.size()));
  const auto d = rasterize_strokes(two_region_strokes(), 64, 64, 8, 8);
  for (std::size_t c = 0; c < d.size(); ++c)
    if (d.cells[c] != kNoDesignation) EXPECT_EQ(labels.cells[c], d.cells[c]);
  EXPECT_LT(secs, 2.0);
}

TEST_F(HttpTest, ErrorStatuses) {
  const auto id = upload();
  StrokeSet oob;
  oob.strokes.push_back({1, {{3, 3}, {80, 3}}, 1.0});
  auto r = put_strokes(id, 0, oob);
  EXPECT_EQ(r->status, 422);
  EXPECT_NE(r->body.find("strokes[0].points[1]"), std::string::npos) << r->body;

  EXPECT_EQ(client_->Put("/v1/stacks/" + id + "/strokes", "{nope", "application/json")->status, 400);
  EXPECT_EQ(client_->Put("/v1/stacks/" + id + "/strokes", "{}", "application/json")->status, 400);

  ASSERT_EQ(put_strokes(id, 0, two_region_strokes())->status, 200);
  EXPECT_EQ(put_strokes(id, 0, StrokeSet{})->status, 409);
  EXPECT_EQ(repo_->session(id).strokes, two_region_strokes());
  EXPECT_EQ(client_->Get("/v1/stacks/" + id + "/segmentation?version=0")->status, 409);
  EXPECT_EQ(client_->Get("/v1/stacks/" + id + "/segmentation?version=x")->status, 400);
  EXPECT_EQ(client_->Get("/v1/stacks/" + id + "/metrics?blended=/no/such.png")->status, 500);
}

TEST_F(HttpTest, PreviewOfConstantMapIsBaseImagePng) {
  const auto id = upload();
  StrokeSet set;
  set.base_index = 1;
  ASSERT_EQ(put_strokes(id, 0, set)->status, 200);
  auto res = client_->Get("/v1/stacks/" + id + "/preview");
  ASSERT_EQ(res->status, 200);
  const auto want = encode_png(FeatureStack::load(manifest_).images()[1]);
  EXPECT_EQ(res->body, std::string(want.begin(), want.end()));
}

TEST_F(HttpTest, ExportAndMetrics) {
  const auto id = upload();
  ASSERT_EQ(put_strokes(id, 0, two_region_strokes())->status, 200);
  auto ex = client_->Post("/v1/stacks/" + id + "/export");
  ASSERT_EQ(ex->status, 200);
  EXPECT_TRUE(fs::exists(fs::path(json::parse(ex->body)["path"].get<std::string>()) / "bundle.json"));
  auto m = client_->Get("/v1/stacks/" + id + "/metrics");
  ASSERT_EQ(m->status, 200);
  EXPECT_EQ(json::parse(m->body)["masked_ssim"], 1.0);
  auto mp = client_->Get("/v1/stacks/" + id + "/metrics?blended=poisson");
  ASSERT_EQ(mp->status, 200);
  EXPECT_LT(json::parse(mp->body)["masked_ssim"].get<double>(), 1.0);
}

TEST_F(HttpTest, RejectsEscapingUploadPaths) {
  httplib::MultipartFormDataItems items = {{"manifest", "{}", "manifest.json", "application/json"},
                                           {"../evil", "x", "evil", "application/octet-stream"}};
  EXPECT_EQ(client_->Post("/v1/stacks", items)->status, 400);
  EXPECT_FALSE(fs::exists(dir_ / "data" / "evil"));
}

}  // namespace
}  // namespace gpm::app
