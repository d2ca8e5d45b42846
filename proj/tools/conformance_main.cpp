// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

// Checks a logits server against the wire protocol. Exit code 0 iff every
// check passes.

#include <CLI11.hpp>

#include <iostream>

#include "ckplug/server.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Logits protocol conformance checks", "ckplug_conformance"};
  std::string url;
  std::string sample = "The capital of France is";
  app.add_option("--url", url, "server base URL, e.g. http://127.0.0.1:8080")->required();
  app.add_option("--sample-text", sample, "text the server's tokenizer can encode")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  std::size_t failed = 0;
  for (const ckplug::ConformanceCheck& c : ckplug::run_conformance(url, sample)) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name;
    if (!c.detail.empty()) std::cout << " (" << c.detail << ")";
    std::cout << '\n';
    if (!c.passed) ++failed;
  }
  std::cout << (failed == 0 ? "all checks passed\n" : std::to_string(failed) + " check(s) failed\n");
  return failed == 0 ? 0 : 1;
}
