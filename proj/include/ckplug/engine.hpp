// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * @file engine.hpp
 * @brief Dual-stream autoregressive generation.
 *
 * A session keeps two prompts: the RAG prompt (context + query) and the
 * query-only prompt. Every generated token is appended to both, so the two
 * streams always score the same continuation. Each step runs two forward
 * passes, hands both logit vectors to the modulator and picks a token.
 */

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ckplug/backend.hpp"
#include "ckplug/errors.hpp"
#include "ckplug/modulator.hpp"

namespace ckplug {

// ---------------------------------------------------------------------------
// Prompt templates
// ---------------------------------------------------------------------------

struct PromptTemplate {
  std::string id;
  /// Render with the retrieved context.
  std::string (*render_rag)(std::string_view context, std::string_view query);
  /// Render from the query alone; never contains a Background block.
  std::string (*render_query_only)(std::string_view query);
};

inline constexpr std::string_view kDefaultTemplate = "background-qa";

/// Registered ids:
///  - "background-qa": "Background: {context}\n\nQ: {query}\n\nA:" (the
///    Background block is always present, empty when there is no context)
///  - "background-qa-elide": same, but drops the Background block when the
///    context is empty, so both prompts coincide
/// Throws InvalidArgument for unknown ids.
const PromptTemplate& find_template(std::string_view id);
std::vector<std::string> template_ids();

// ---------------------------------------------------------------------------
// Token selection
// ---------------------------------------------------------------------------

enum class DecodeMode { kGreedy, kTopKSample };

struct DecodeOptions {
  DecodeMode mode = DecodeMode::kGreedy;
  std::size_t sample_k = 100;
  std::uint64_t seed = 0;
};

/// Greedy picks the lowest-id argmax. Top-k sampling renormalizes the k most
/// probable ids (ties by lower id) and draws one with `rng`.
TokenId select_token(const TokenDistribution& dist, const DecodeOptions& options, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Sessions and traces
// ---------------------------------------------------------------------------

struct SessionSpec {
  std::string context;
  std::string query;
  std::string template_id{kDefaultTemplate};
  ModulationConfig config{};
  std::size_t max_new_tokens = 64;
  DecodeOptions decode{};
  /// Keep a truncated copy of each emitted distribution for knowledge-token
  /// capture: the `capture_top_n` most probable ids plus every id listed in
  /// `capture_keep_ids`.
  bool capture = false;
  std::size_t capture_top_n = 512;
  std::vector<TokenId> capture_keep_ids;

  void validate() const;
};

struct Candidate {
  TokenId id = 0;
  double prob = 0.0;

  friend bool operator==(const Candidate&, const Candidate&) = default;
};

struct DecodeStep {
  std::size_t position = 0;
  TokenId token_id = 0;
  std::string token_text;
  ConfidenceGainRecord cg;
  bool fired = false;
  double alpha_used = 0.5;
  double dist_entropy_bits = 0.0;
  std::vector<Candidate> top_candidates;
  /// Capture mode only; sorted by descending probability, ties by lower id.
  std::vector<Candidate> stored_distribution;
};

enum class StopReason { kEos, kMaxTokens };

std::string_view to_string(StopReason reason);

struct GenerationTrace {
  SessionSpec spec;
  std::vector<DecodeStep> steps;
  /// Decode of every generated id except a terminating EOS.
  std::string final_text;
  StopReason stop_reason = StopReason::kMaxTokens;
};

/// Raised by Session::generate; carries the steps completed before the failure.
class GenerationError : public Error {
 public:
  GenerationError(const std::string& message, GenerationTrace partial)
      : Error(message), partial_(std::move(partial)) {}

  const GenerationTrace& partial() const noexcept { return partial_; }

 private:
  GenerationTrace partial_;
};

/// Single-writer state machine; distinct sessions are independent.
class Session {
 public:
  /// Renders and tokenizes both prompts. Propagates backend errors and
  /// InvalidArgument for unknown templates or invalid specs.
  Session(const Backend& backend, SessionSpec spec);

  DecodeStep step();
  GenerationTrace generate();

  bool finished() const noexcept { return finished_; }
  const SessionSpec& spec() const noexcept { return spec_; }
  const std::vector<TokenId>& rag_prefix() const noexcept { return rag_prefix_; }
  const std::vector<TokenId>& query_prefix() const noexcept { return query_prefix_; }
  const std::vector<TokenId>& generated() const noexcept { return generated_; }

 private:
  const Backend& backend_;
  SessionSpec spec_;
  ModelMeta meta_;
  std::vector<TokenId> rag_prefix_;
  std::vector<TokenId> query_prefix_;
  std::vector<TokenId> generated_;
  std::vector<DecodeStep> steps_;
  std::mt19937_64 rng_;
  bool finished_ = false;
  StopReason stop_reason_ = StopReason::kMaxTokens;
};

/// Trace persistence, one JSON object per generation.
nlohmann::json trace_to_json(const GenerationTrace& trace);
GenerationTrace trace_from_json(const nlohmann::json& doc);

nlohmann::json spec_to_json(const SessionSpec& spec);

}  // namespace ckplug
