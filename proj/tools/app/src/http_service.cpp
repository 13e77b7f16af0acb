// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpm_app/http_service.hpp"

#include <httplib.h>
#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <json.hpp>

#include "gpm/error.hpp"
#include "gpm_app/stroke_json.hpp"

namespace gpm::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidStroke:
    case ErrorCode::kImageSizeMismatch:
    case ErrorCode::kGridNotDivisible:
    case ErrorCode::kNoBoundary:
      return 422;
    case ErrorCode::kIo:
      return 500;
    default:
      return 400;
  }
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& msg) {
  res.status = status;
  res.set_content(json{{"error", code}, {"message", msg}}.dump(), "application/json");
}

// Runs a handler and maps failures to status codes.
template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const NotFound& e) {
      send_error(res, 404, "NotFound", e.what());
    } catch (const VersionConflict& e) {
      send_error(res, 409, "VersionConflict", e.what());
    } catch (const Error& e) {
      send_error(res, status_for(e.code()), std::string(to_string(e.code())), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "BadRequest", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "Internal", e.what());
    }
  };
}

void send_png(httplib::Response& res, const std::vector<std::uint8_t>& png) {
  res.set_content(std::string(png.begin(), png.end()), "image/png");
}

json summary(StackRepository& repo, const std::string& id) {
  const auto st = repo.stack(id);
  const auto& m = st->manifest();
  json layers = json::array();
  for (const auto& l : m.layers) {
    layers.push_back({{"layer_id", l.id},
                      {"role", std::string(to_string(l.role))},
                      {"feat_width", l.feat_width},
                      {"feat_height", l.feat_height},
                      {"heads", l.heads},
                      {"dim", l.dim}});
  }
  const auto& seg = m.segmentation_layer();
  return {{"stack_id", id},
          {"n_images", m.n_images},
          {"width", m.width},
          {"height", m.height},
          {"layers", layers},
          {"timesteps", m.timesteps},
          {"segmentation_grid", {{"width", seg.feat_width}, {"height", seg.feat_height}}},
          {"prompts", m.prompts},
          {"seeds", m.seeds},
          {"version", repo.session(id).version}};
}

}  // namespace

struct HttpService::Impl {
  StackRepository& repo;
  httplib::Server server;
  std::atomic<int> staging_counter{0};

  explicit Impl(StackRepository& r) : repo(r) { routes(); }

  void routes() {
    const std::string id_re = "/v1/stacks/([0-9a-f]{16})";

    server.Post("/v1/stacks", guarded([this](const httplib::Request& req, httplib::Response& res) {
      if (!req.is_multipart_form_data() || !req.has_file("manifest")) {
        throw Error(ErrorCode::kInvalidArgument, "expected multipart form with a 'manifest' part");
      }
      const fs::path staging = repo.root() / "staging" /
                               (std::to_string(::getpid()) + "-" + std::to_string(staging_counter++));
      fs::remove_all(staging);
      fs::create_directories(staging);
      struct Cleanup {
        fs::path p;
        ~Cleanup() {
          std::error_code ec;
          fs::remove_all(p, ec);
        }
      } cleanup{staging};
      for (const auto& [name, part] : req.files) {
        const fs::path rel = name == "manifest" ? fs::path("manifest.json") : fs::path(name);
        if (rel.empty() || rel.is_absolute()) throw Error(ErrorCode::kInvalidArgument, "bad part name '" + name + "'");
        for (const auto& seg : rel) {
          if (seg == "..") throw Error(ErrorCode::kInvalidArgument, "bad part name '" + name + "'");
        }
        fs::create_directories((staging / rel).parent_path());
        write_file_bytes(staging / rel,
                         std::span(reinterpret_cast<const std::uint8_t*>(part.content.data()),
                                   part.content.size()));
      }
      const std::string id = repo.ingest(staging / "manifest.json");
      res.status = 201;
      res.set_content(json{{"stack_id", id}}.dump(), "application/json");
    }));

    server.Get(id_re, guarded([this](const httplib::Request& req, httplib::Response& res) {
      res.set_content(summary(repo, req.matches[1]).dump(), "application/json");
    }));

    server.Put(id_re + "/strokes", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      repo.stack(id);  // 404 before payload errors
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::parse_error& e) {
        throw Error(ErrorCode::kInvalidArgument, std::string("body: ") + e.what());
      }
      if (!body.is_object() || !body.contains("expected_version") ||
          !body["expected_version"].is_number_unsigned()) {
        throw Error(ErrorCode::kInvalidArgument, "expected_version: missing or not a non-negative integer");
      }
      const auto expected = body["expected_version"].get<std::uint64_t>();
      StrokeSet strokes = parse_stroke_set(req.body);
      const auto version = repo.put_strokes(id, expected, std::move(strokes));
      res.set_content(json{{"version", version}}.dump(), "application/json");
    }));

    server.Get(id_re + "/segmentation", guarded([this](const httplib::Request& req, httplib::Response& res) {
      std::optional<std::uint64_t> version;
      if (req.has_param("version")) {
        try {
          version = std::stoull(req.get_param_value("version"));
        } catch (const std::exception&) {
          throw Error(ErrorCode::kInvalidArgument, "version: not an integer");
        }
      }
      const auto seg = repo.segmentation(req.matches[1], version);
      char energy[64];
      std::snprintf(energy, sizeof(energy), "%.17g", seg.labels.energy);
      res.set_header("X-GPM-Energy", energy);
      res.set_header("X-GPM-Version", std::to_string(seg.version));
      res.set_header("X-GPM-Solve-Ms", std::to_string(seg.timing.solve_ms));
      send_png(res, encode_label_png(seg.labels.labels));
    }));

    server.Get(id_re + "/preview", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_png(res, encode_png(repo.preview(req.matches[1])));
    }));

    server.Post(id_re + "/export", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto path = repo.export_current(req.matches[1]);
      res.set_content(json{{"path", fs::absolute(path).string()}}.dump(), "application/json");
    }));

    server.Get(id_re + "/metrics", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string blended = req.has_param("blended") ? req.get_param_value("blended") : "preview";
      res.set_content(metrics_to_json(repo.metrics(req.matches[1], blended)), "application/json");
    }));
  }
};

HttpService::HttpService(StackRepository& repo) : impl_(std::make_unique<Impl>(repo)) {}
HttpService::~HttpService() = default;

int HttpService::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool HttpService::listen() { return impl_->server.listen_after_bind(); }
void HttpService::stop() { impl_->server.stop(); }
void HttpService::wait_until_ready() const { impl_->server.wait_until_ready(); }

std::pair<std::string, int> parse_address(const std::string& addr) {
  const auto colon = addr.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size()) {
    throw Error(ErrorCode::kInvalidArgument, "address must be host:port, got '" + addr + "'");
  }
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(addr.substr(colon + 1), &used);
    if (used != addr.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidArgument, "bad port in '" + addr + "'");
  }
  if (port < 0 || port > 65535) throw Error(ErrorCode::kInvalidArgument, "port out of range in '" + addr + "'");
  return {addr.substr(0, colon), port};
}

}  // namespace gpm::app
