// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * @file backend.hpp
 * @brief Next-token logits providers.
 *
 * `ToyBackend` is an in-process table model used by tests and demos.
 * `RemoteBackend` speaks the JSON-over-HTTP logits protocol:
 *
 *   GET  /v1/meta                  -> {"vocab_size", "eos_token_id", "model_name", "max_context_tokens"}
 *   POST /v1/encode {"text": str}  -> {"ids": [int]}
 *   POST /v1/decode {"ids": [int]} -> {"text": str}
 *   POST /v1/logits {"ids": [int]} -> {"logits": [float x vocab_size]}
 *   errors                         -> {"error": {"code": str, "message": str}}
 *
 * Every implementation is a pure function of its model and the prefix, and is
 * safe for concurrent calls.
 */

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ckplug/dist_math.hpp"

namespace httplib {
class Client;
}

namespace ckplug {

struct ModelMeta {
  std::size_t vocab_size = 0;
  TokenId eos_token_id = 0;
  std::string model_name;
  std::size_t max_context_tokens = 0;
};

class Backend {
 public:
  virtual ~Backend() = default;

  virtual ModelMeta meta() const = 0;
  virtual std::vector<TokenId> encode(std::string_view text) const = 0;
  /// Throws BackendError("bad_request") on ids outside the vocabulary.
  virtual std::string decode(std::span<const TokenId> ids) const = 0;
  /// Throws BackendError("context_overflow") when the prefix exceeds max_context_tokens.
  virtual LogitVector next_logits(std::span<const TokenId> prefix) const = 0;
};

// ---------------------------------------------------------------------------
// Toy model
// ---------------------------------------------------------------------------

/// A transition fires when the prefix ends with `pattern`; the longest
/// matching pattern wins, otherwise the fallback row is used.
struct ToyTransition {
  std::vector<TokenId> pattern;
  std::vector<double> logits;
};

/**
 * Closed-vocabulary table model.
 *
 * Tokenization splits on whitespace; each word is covered greedily by the
 * longest vocabulary entry, continuation pieces being spelled "##piece" in
 * the vocabulary (so "England" may split into "Eng" + "##land"). Decoding
 * inserts a space before every word-initial token except the first.
 */
struct ToyModelSpec {
  std::string model_name = "toy";
  std::vector<std::string> vocabulary;
  TokenId eos_token_id = 0;
  std::optional<TokenId> unk_token_id;
  std::size_t max_context_tokens = 4096;
  std::vector<double> fallback;
  std::vector<ToyTransition> transitions;
};

/// Parses a version-1 toy spec document. Rows may be given as full arrays or
/// as {"default": x, "set": {"token": value, ...}}. Throws InvalidInput on any
/// schema violation, including duplicate patterns and rows of the wrong length.
ToyModelSpec parse_toy_spec(const nlohmann::json& doc);
ToyModelSpec load_toy_spec(const std::filesystem::path& path);

class ToyBackend final : public Backend {
 public:
  explicit ToyBackend(ToyModelSpec spec);

  ModelMeta meta() const override;
  std::vector<TokenId> encode(std::string_view text) const override;
  std::string decode(std::span<const TokenId> ids) const override;
  LogitVector next_logits(std::span<const TokenId> prefix) const override;

  const ToyModelSpec& spec() const noexcept { return spec_; }
  std::optional<TokenId> token_id(std::string_view token) const;

 private:
  ToyModelSpec spec_;
  std::map<std::string, TokenId, std::less<>> ids_;
  std::size_t longest_pattern_ = 0;
  std::map<std::vector<TokenId>, std::size_t> rows_;
};

// ---------------------------------------------------------------------------
// Remote client
// ---------------------------------------------------------------------------

struct RetryPolicy {
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{100};
};

/// Retries transport failures and 5xx responses with exponential backoff,
/// then surfaces a BackendError. 4xx responses are surfaced immediately.
/// Requests are serialized over a single connection.
class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(std::string base_url, RetryPolicy retry = {});
  ~RemoteBackend() override;

  ModelMeta meta() const override;
  std::vector<TokenId> encode(std::string_view text) const override;
  std::string decode(std::span<const TokenId> ids) const override;
  LogitVector next_logits(std::span<const TokenId> prefix) const override;

  const std::string& base_url() const noexcept { return base_url_; }

 private:
  nlohmann::json get(const std::string& path) const;
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const;

  std::string base_url_;
  RetryPolicy retry_;
  mutable std::mutex mu_;
  std::unique_ptr<httplib::Client> client_;
  mutable std::optional<ModelMeta> meta_;
};

/// "toy:<spec path>" or "remote:<base url>". Throws InvalidArgument otherwise.
std::unique_ptr<Backend> make_backend(std::string_view selector);

}  // namespace ckplug
