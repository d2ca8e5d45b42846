// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#include "ckplug/dist_math.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "ckplug/errors.hpp"

namespace ckplug {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Shared kernel; callers have already validated the entries.
LogProbVector log_softmax_unchecked(const std::vector<double>& v) {
  const double shift = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) {
    if (x != kNegInf) sum += std::exp(x - shift);
  }
  const double log_sum = std::log(sum);
  LogProbVector out;
  out.values.reserve(v.size());
  for (double x : v) out.values.push_back(x == kNegInf ? kNegInf : (x - shift) - log_sum);
  return out;
}

}  // namespace

LogProbVector log_softmax(const LogitVector& logits) {
  if (logits.values.empty()) throw InvalidInput("log_softmax: empty logit vector");
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits.values[i])) {
      throw InvalidInput("log_softmax: non-finite logit at id " + std::to_string(i));
    }
  }
  return log_softmax_unchecked(logits.values);
}

LogProbVector log_softmax_masked(const LogitVector& logits) {
  bool any_finite = false;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double x = logits.values[i];
    if (std::isnan(x) || x == std::numeric_limits<double>::infinity()) {
      throw InvalidInput("log_softmax_masked: NaN or +inf at id " + std::to_string(i));
    }
    any_finite = any_finite || std::isfinite(x);
  }
  if (!any_finite) throw InvalidInput("log_softmax_masked: every entry is masked");
  return log_softmax_unchecked(logits.values);
}

TokenDistribution to_distribution(const LogProbVector& logprobs) {
  TokenDistribution dist;
  dist.probs.reserve(logprobs.size());
  for (double lp : logprobs.values) dist.probs.push_back(std::exp(lp));
  return dist;
}

TokenDistribution softmax(const LogitVector& logits) {
  return to_distribution(log_softmax(logits));
}

void validate_distribution(const TokenDistribution& dist) {
  if (dist.probs.empty()) throw InvalidInput("distribution is empty");
  double sum = 0.0;
  for (double p : dist.probs) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidInput("distribution entry outside [0,1]");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kNormTolerance) {
    throw InvalidInput("distribution sums to " + std::to_string(sum));
  }
}

double entropy_bits(const TokenDistribution& dist) {
  validate_distribution(dist);
  double h = 0.0;
  for (double p : dist.probs) {
    if (p > 0.0) h -= p * std::log2(p);
  }
  // Rounding can leave a one-hot distribution at -0.0 or a hair below zero.
  return std::max(h, 0.0);
}

double rank_value(std::span<const double> values, std::size_t k) {
  if (k == 0 || k > values.size()) {
    throw InvalidArgument("rank_value: k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(values.size()) + "]");
  }
  std::vector<double> scratch(values.begin(), values.end());
  auto nth = scratch.begin() + static_cast<std::ptrdiff_t>(k - 1);
  std::nth_element(scratch.begin(), nth, scratch.end(), std::greater<>());
  return *nth;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw InvalidInput("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

}  // namespace ckplug
