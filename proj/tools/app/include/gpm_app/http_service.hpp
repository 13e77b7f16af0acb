// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include "gpm_app/repository.hpp"

namespace gpm::app {

/// HTTP front end over a StackRepository.
///
///   POST /v1/stacks                          multipart: "manifest" + one part per file,
///                                            named by its manifest-relative path
///   GET  /v1/stacks/{id}                     manifest summary
///   PUT  /v1/stacks/{id}/strokes             {expected_version, base_index, strokes[]}
///   GET  /v1/stacks/{id}/segmentation        indexed PNG, X-GPM-Energy / X-GPM-Version
///   GET  /v1/stacks/{id}/preview             PNG
///   POST /v1/stacks/{id}/export              {"path": ...}
///   GET  /v1/stacks/{id}/metrics?blended=    metrics JSON
class HttpService {
 public:
  explicit HttpService(StackRepository& repo);
  ~HttpService();

  /// Binds without serving. Port 0 picks a free port; returns the bound port or -1.
  int bind(const std::string& host, int port);
  /// Serves until stop(). Call after bind().
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// host:port -> (host, port). Throws InvalidArgument on malformed input.
std::pair<std::string, int> parse_address(const std::string& addr);

}  // namespace gpm::app
