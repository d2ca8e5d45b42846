// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ckplug/backend.hpp"

namespace httplib {
class Server;
}

namespace ckplug {

/// Serves any Backend over the logits wire protocol. The backend must outlive
/// the server. HTTP status per error code: bad_request 400, context_overflow
/// 413, internal 500.
class LogitsServer {
 public:
  explicit LogitsServer(const Backend& backend);
  ~LogitsServer();

  LogitsServer(const LogitsServer&) = delete;
  LogitsServer& operator=(const LogitsServer&) = delete;

  /// Binds to an ephemeral port; returns it, or -1 on failure.
  int bind_any_port(const std::string& host = "127.0.0.1");
  bool bind(const std::string& host, int port);
  /// Blocks until stop() is called.
  bool run();
  /// Blocks until a concurrent run() is accepting connections.
  void wait_until_ready() const;
  void stop();

 private:
  const Backend& backend_;
  std::unique_ptr<httplib::Server> server_;
};

struct ConformanceCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Exercises every endpoint and error code of a server at `base_url`,
/// including a repeat-call determinism check at 1e-5. `sample_text` must be
/// encodable by the server's tokenizer.
std::vector<ConformanceCheck> run_conformance(const std::string& base_url,
                                              const std::string& sample_text = "The capital of France is");

}  // namespace ckplug
