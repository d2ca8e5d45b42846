// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

/**
 * @file dist_math.hpp
 * @brief Numerically stable primitives over logit and probability vectors.
 *
 * All probability math is done in natural-log space with max subtraction and
 * exponentiated only when a TokenDistribution is requested. Entropy is the one
 * exception to the natural-log rule: it is reported in bits.
 *
 * Tolerances: 1e-6 for normalization checks, 1e-9 for pure identities.
 */

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace ckplug {

using TokenId = std::uint32_t;

inline constexpr double kNormTolerance = 1e-6;

/// Raw next-token scores, one per vocabulary id. Raw model logits are always
/// finite; fused logits may carry -inf for masked ids.
struct LogitVector {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
};

/// Natural-log probabilities per vocabulary id.
struct LogProbVector {
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
};

/// Non-negative probabilities summing to one.
struct TokenDistribution {
  std::vector<double> probs;

  std::size_t size() const noexcept { return probs.size(); }
};

/// log-softmax of finite logits. Throws InvalidInput on empty or non-finite input.
LogProbVector log_softmax(const LogitVector& logits);

/// log-softmax that tolerates -inf entries (masked ids stay -inf). At least one
/// entry must be finite; NaN and +inf are rejected.
LogProbVector log_softmax_masked(const LogitVector& logits);

/// exp(log_softmax(logits)).
TokenDistribution softmax(const LogitVector& logits);

/// Exponentiates a normalized log-prob vector.
TokenDistribution to_distribution(const LogProbVector& logprobs);

/// Throws InvalidInput unless every entry is in [0,1] and the sum is 1 within 1e-6.
void validate_distribution(const TokenDistribution& dist);

/// Shannon entropy in bits, with 0 log 0 = 0. Validates the distribution first.
double entropy_bits(const TokenDistribution& dist);

/// Value of the k-th largest entry (1-based); equal values occupy consecutive
/// ranks. Throws InvalidArgument when k is 0 or exceeds the length.
double rank_value(std::span<const double> values, std::size_t k);

/// Index of the largest entry, lowest index on ties. Throws InvalidInput when empty.
std::size_t argmax(std::span<const double> values);

}  // namespace ckplug
