// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Shared helpers for unit and acceptance tests: fixture paths, random inputs
// and brute-force reference implementations written without the library's
// fast paths.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "ckplug/backend.hpp"
#include "ckplug/engine.hpp"
#include "ckplug/modulator.hpp"
#include "ckplug/server.hpp"

namespace ckplug::testing {

std::filesystem::path data_path(const std::string& relative);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

std::string read_file(const std::filesystem::path& path);

LogitVector random_logits(std::mt19937_64& rng, std::size_t n, double scale = 4.0);

/// Union of per-stream top-k by full sort, ties at the k-th value included.
std::vector<TokenId> brute_force_head(const std::vector<double>& a, const std::vector<double>& b, std::size_t k);

struct OracleCapture {
  std::optional<double> p_cont;
  std::optional<double> p_para;
  std::optional<std::size_t> position;
};

/// Plain-loop knowledge-token capture for ASCII lowercase inputs whose token
/// strings and answers are already in normalized form.
OracleCapture brute_force_capture(const std::vector<std::vector<Candidate>>& steps, const std::string& s_cont,
                                  const std::string& s_para, const std::function<std::string(TokenId)>& decode);

/// Random capture scenario: vocabulary strings, answers and per-step stored
/// distributions with frequent probability ties.
struct CaptureCase {
  std::vector<std::string> vocab;
  std::string s_cont;
  std::string s_para;
  std::vector<std::vector<Candidate>> steps;
};

CaptureCase random_capture_case(std::mt19937_64& rng);

/// Backend whose next_logits is an arbitrary function; encode splits on
/// whitespace and maps each word through `vocabulary` (unknown words throw).
class FunctionBackend final : public Backend {
 public:
  using LogitsFn = std::function<LogitVector(std::span<const TokenId>)>;

  FunctionBackend(std::vector<std::string> vocabulary, TokenId eos, LogitsFn fn);

  ModelMeta meta() const override;
  std::vector<TokenId> encode(std::string_view text) const override;
  std::string decode(std::span<const TokenId> ids) const override;
  LogitVector next_logits(std::span<const TokenId> prefix) const override;

 private:
  std::vector<std::string> vocab_;
  TokenId eos_;
  LogitsFn fn_;
};

/// Serves `backend` on an ephemeral localhost port for the object's lifetime.
class ServedBackend {
 public:
  explicit ServedBackend(const Backend& backend);
  ~ServedBackend();

  ServedBackend(const ServedBackend&) = delete;
  ServedBackend& operator=(const ServedBackend&) = delete;

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  LogitsServer server_;
  int port_ = -1;
  std::thread thread_;
};

}  // namespace ckplug::testing
