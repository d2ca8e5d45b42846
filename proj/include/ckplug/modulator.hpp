// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * @file modulator.hpp
 * @brief Parametric/contextual reliance control over next-token distributions.
 *
 * Given logits from a context+query pass (`logits_rq`) and a query-only pass
 * (`logits_q`) that share the same generated suffix:
 *
 *   q_para = log_softmax(logits_q)
 *   q_cont = log_softmax(logits_rq) - log_softmax(logits_q)
 *   fused  = alpha * q_para + (1 - alpha) * q_cont   on the head set, -inf elsewhere
 *
 * The head set is the union of the top-k ids of q_para and of q_cont. Fusion
 * only replaces the RAG distribution on steps flagged as conflicts.
 *
 * alpha = 1 leans fully on parametric knowledge, alpha = 0 fully on the
 * context, and alpha = 0.5 collapses to 0.5 * log_softmax(logits_rq), which
 * preserves the RAG argmax over the head set.
 */

#include <cstddef>
#include <vector>

#include "ckplug/conflict.hpp"
#include "ckplug/dist_math.hpp"

namespace ckplug {

inline constexpr std::size_t kDefaultHeadK = 10;

enum class AlphaMode {
  kFixed,
  kAdaptive,  ///< alpha = h_cont / (h_para + h_cont), recomputed every step
};

struct ModulationConfig {
  AlphaMode mode = AlphaMode::kFixed;
  double alpha = 0.5;
  std::size_t head_k = kDefaultHeadK;
  ConflictPolicy policy{};
  /// false disables fusion entirely (plain RAG decoding); CG is still reported.
  bool enabled = true;

  static ModulationConfig fixed(double alpha, std::size_t head_k = kDefaultHeadK);
  static ModulationConfig adaptive(std::size_t head_k = kDefaultHeadK);
  static ModulationConfig baseline();

  /// Throws InvalidArgument on alpha outside [0,1], head_k == 0 or non-finite epsilon.
  void validate() const;
};

/// Log-ratio vector q_cont. Not normalized; only meaningful inside fusion.
struct ContrastVector {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
};

/// Sorted, duplicate-free token ids.
struct HeadSet {
  std::vector<TokenId> ids;

  bool contains(TokenId id) const;
  std::size_t size() const noexcept { return ids.size(); }
};

struct ModulationResult {
  TokenDistribution dist;
  ConfidenceGainRecord cg;
  bool fired = false;
  double alpha_used = 0.5;
};

LogProbVector parametric_stream(const LogitVector& logits_q);

/// Throws ShapeError on differing lengths.
ContrastVector contextual_stream(const LogitVector& logits_rq, const LogitVector& logits_q);

/// Union of the top-`head_k` ids of both streams. Boundary ties are included,
/// so each side may contribute more than `head_k` ids.
HeadSet head_set(const LogProbVector& q_para, const ContrastVector& q_cont, std::size_t head_k);

/// Masked fusion; ids outside `head` are -inf.
LogitVector fuse(const LogProbVector& q_para, const ContrastVector& q_cont, double alpha,
                 const HeadSet& head);

double adaptive_alpha(double h_para, double h_cont);

/// One decoding step of the controller. Non-conflict steps return
/// softmax(logits_rq) untouched. A head_k larger than the vocabulary is clamped.
ModulationResult modulated_distribution(const LogitVector& logits_rq, const LogitVector& logits_q,
                                        const ModulationConfig& config);

}  // namespace ckplug
