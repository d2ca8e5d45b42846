// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * @file evalkit.hpp
 * @brief Knowledge-control evaluation: datasets, answer matching, metrics,
 * knowledge-token capture and the entropy-shift / probability-sweep reports.
 *
 * Metrics (percentages):
 *   ConR = share of outputs containing the contextual (counterfactual) answer
 *   ParR = share of outputs containing the parametric (ground-truth) answer
 *   MR   = ParR / (ParR + ConR), absent when both are zero
 */

#include <cstddef>
#include <filesystem>
#include <functional>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ckplug/backend.hpp"
#include "ckplug/engine.hpp"

namespace ckplug {

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct EvalRecord {
  std::string id;
  std::string query;
  /// Counterfactual context; empty for context-free records.
  std::string context;
  std::string parametric_answer;
  std::string contextual_answer;
  std::vector<std::string> parametric_aliases;
  std::vector<std::string> contextual_aliases;
  /// Optional factual context restating the parametric answer.
  std::string support_context;
};

/// JSONL, one object per line. Required: id, query, context,
/// parametric_answer, contextual_answer. Optional: parametric_aliases,
/// contextual_aliases, support_context. Blank lines are skipped. Throws
/// InvalidInput naming the line (and field) of the first bad record.
std::vector<EvalRecord> parse_dataset(std::istream& in, const std::string& source_name);
std::vector<EvalRecord> load_dataset(const std::filesystem::path& path);

nlohmann::json record_to_json(const EvalRecord& record);

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

/// NFKD, strip combining marks, NFKC, lowercase, punctuation to spaces,
/// collapse whitespace, trim.
std::string normalize(std::string_view text);

/// True iff the normalized answer (or any alias) occurs in the normalized
/// output on word boundaries. Empty answers never match.
bool answer_match(std::string_view output, std::string_view answer, std::span<const std::string> aliases = {});

/// Replaces every word-boundary normalized occurrence of the parametric answer
/// in `original.context` with `substitute`. Throws InvalidInput when the answer
/// does not occur and InvalidArgument when the substitute normalizes to nothing.
EvalRecord build_counterfactual(const EvalRecord& original, std::string_view substitute);

// ---------------------------------------------------------------------------
// Outcomes and metrics
// ---------------------------------------------------------------------------

struct CgSummary {
  std::size_t steps = 0;
  std::size_t fired = 0;
  double mean_cg = 0.0;
  double min_cg = 0.0;
};

struct EvalOutcome {
  std::string id;
  std::string output_text;
  bool con_match = false;
  bool par_match = false;
  bool hit = false;
  std::optional<double> captured_p_cont;
  std::optional<double> captured_p_para;
  CgSummary cg;
};

struct MetricsTable {
  double con_r = 0.0;
  double par_r = 0.0;
  std::optional<double> mr;
  double hit_rate = 0.0;
  std::size_t n = 0;
  /// Mean over hit outcomes of par / (par + con), as a percentage.
  std::optional<double> mr_per_example;
};

/// ParR / (ParR + ConR) as a percentage; nullopt when both are zero.
std::optional<double> memorization_ratio(double par_r, double con_r);

/// Throws InvalidArgument on empty input.
MetricsTable aggregate_metrics(std::span<const EvalOutcome> outcomes);
double hit_rate(std::span<const EvalOutcome> outcomes);

EvalOutcome score_outcome(const EvalRecord& record, const GenerationTrace& trace);

// ---------------------------------------------------------------------------
// Knowledge-token capture
// ---------------------------------------------------------------------------

/// Maximal common contiguous substrings (at least 3 code points) of the two
/// normalized answers.
std::vector<std::string> common_substrings(std::string_view s_cont, std::string_view s_para);

struct CaptureResult {
  std::optional<double> p_cont;
  std::optional<double> p_para;
  /// First step at which anything was captured.
  std::optional<std::size_t> position;
};

/// Decodes a single token id; the result is normalized before matching.
using TokenDecoder = std::function<std::string(TokenId)>;

/**
 * Knowledge-token capture over per-step stored distributions.
 *
 * At each step whose argmax token decodes into either answer, the stored ids
 * are scanned by descending probability: a token inside a common substring
 * aborts the step while nothing has been captured yet; otherwise the first
 * token decoding into each answer records its probability. Captures persist
 * across steps (first capture wins). Token strings and answers are compared
 * after normalize(); empty token strings never match.
 */
CaptureResult capture_knowledge_tokens(std::span<const std::vector<Candidate>> steps, std::string_view s_cont,
                                       std::string_view s_para, const TokenDecoder& decode);

/// Throws InvalidArgument when the trace was not recorded in capture mode.
CaptureResult knowledge_token_capture(const GenerationTrace& trace, std::string_view s_cont, std::string_view s_para,
                                      const Backend& backend);

/// Normalized decode of every vocabulary id, computed once per backend.
class TokenLexicon {
 public:
  explicit TokenLexicon(const Backend& backend);

  const std::string& normalized(TokenId id) const { return texts_.at(id); }
  std::size_t size() const noexcept { return texts_.size(); }
  /// Ids whose normalized text is non-empty and occurs inside any of the
  /// normalized `answers`.
  std::vector<TokenId> ids_within(std::span<const std::string> answers) const;

 private:
  std::vector<std::string> texts_;
};

// ---------------------------------------------------------------------------
// Runs and reports
// ---------------------------------------------------------------------------

struct EvalOptions {
  std::string template_id{kDefaultTemplate};
  ModulationConfig config{};
  std::size_t max_new_tokens = 64;
  DecodeOptions decode{};
  bool capture = false;
  std::size_t parallel = 1;
};

struct RecordFailure {
  std::string id;
  std::string message;
};

struct EvalRun {
  std::vector<EvalOutcome> outcomes;  // dataset order, successes only
  std::vector<RecordFailure> failures;
};

/// Per-record session seed: stable under dataset reordering and parallelism.
std::uint64_t record_seed(std::uint64_t seed, std::string_view record_id);

SessionSpec session_for(const EvalRecord& record, const std::string& context, const EvalOptions& options,
                        const TokenLexicon* lexicon);

/// Generates and scores every record, fanning out over `options.parallel`
/// threads. Failing records are reported, not fatal.
EvalRun evaluate(std::span<const EvalRecord> records, const Backend& backend, const EvalOptions& options);

enum class ContextVariant { kSupport, kConflict, kNone };

std::string_view to_string(ContextVariant variant);

struct EntropyShiftRow {
  std::string id;
  ContextVariant variant = ContextVariant::kConflict;
  bool ok = false;
  std::string note;
  std::optional<std::size_t> position;
  double h_before = 0.0;  // query-only stream
  double h_after = 0.0;   // with context
  double shift_pct = 0.0;
};

/// Runs unmodulated generation with the chosen context variant, locates the
/// answer-token step via capture and reports the entropy change at that step.
/// Rows without a capturable step (or with zero entropy before) are flagged.
std::vector<EntropyShiftRow> entropy_shift_report(std::span<const EvalRecord> records, const Backend& backend,
                                                  const EvalOptions& options, ContextVariant variant);

/// Mean shift over the rows flagged ok; nullopt when none are.
std::optional<double> mean_shift(std::span<const EntropyShiftRow> rows);

struct SweepRow {
  std::string id;
  double alpha = 0.0;
  std::optional<double> p_cont;
  std::optional<double> p_para;
};

/// Capture-enabled generation for every (record, alpha). Throws
/// InvalidArgument on empty grids or values outside [0,1].
std::vector<SweepRow> probability_sweep(std::span<const EvalRecord> records, const Backend& backend,
                                        std::span<const double> alphas, const EvalOptions& options);

/// "start:step:stop" (inclusive, tolerant to rounding) or a comma list.
std::vector<double> parse_alpha_grid(std::string_view text);

// ---------------------------------------------------------------------------
// Output formats
// ---------------------------------------------------------------------------

std::string metrics_csv_header();
/// dataset,alpha,ConR,ParR,MR,HitRate,N,MR_example; alpha printed as "adaptive"
/// in adaptive mode and as "baseline" when modulation is disabled.
std::string metrics_csv_row(std::string_view dataset, const ModulationConfig& config, const MetricsTable& m);
std::string sweep_csv(std::span<const SweepRow> rows);
std::string entropy_shift_csv(std::span<const EntropyShiftRow> rows);
nlohmann::json outcome_to_json(const EvalOutcome& outcome);

}  // namespace ckplug
