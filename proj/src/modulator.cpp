// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#include "ckplug/modulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ckplug/errors.hpp"

namespace ckplug {

ModulationConfig ModulationConfig::fixed(double alpha, std::size_t head_k) {
  ModulationConfig c;
  c.mode = AlphaMode::kFixed;
  c.alpha = alpha;
  c.head_k = head_k;
  c.validate();
  return c;
}

ModulationConfig ModulationConfig::adaptive(std::size_t head_k) {
  ModulationConfig c;
  c.mode = AlphaMode::kAdaptive;
  c.head_k = head_k;
  c.validate();
  return c;
}

ModulationConfig ModulationConfig::baseline() {
  ModulationConfig c;
  c.enabled = false;
  return c;
}

void ModulationConfig::validate() const {
  if (mode == AlphaMode::kFixed && !(alpha >= 0.0 && alpha <= 1.0)) {
    throw InvalidArgument("alpha must lie in [0,1], got " + std::to_string(alpha));
  }
  if (head_k == 0) throw InvalidArgument("head_k must be at least 1");
  if (!std::isfinite(policy.epsilon)) throw InvalidArgument("epsilon must be finite");
}

bool HeadSet::contains(TokenId id) const {
  return std::binary_search(ids.begin(), ids.end(), id);
}

LogProbVector parametric_stream(const LogitVector& logits_q) { return log_softmax(logits_q); }

namespace {

ContrastVector contrast(const LogProbVector& lp_rq, const LogProbVector& lp_q) {
  ContrastVector out;
  out.values.resize(lp_rq.size());
  for (std::size_t i = 0; i < lp_rq.size(); ++i) out.values[i] = lp_rq.values[i] - lp_q.values[i];
  return out;
}

void append_at_or_above(std::span<const double> values, std::size_t k, std::vector<TokenId>& ids) {
  const double threshold = rank_value(values, k);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] >= threshold) ids.push_back(static_cast<TokenId>(i));
  }
}

}  // namespace

ContrastVector contextual_stream(const LogitVector& logits_rq, const LogitVector& logits_q) {
  if (logits_rq.size() != logits_q.size()) {
    throw ShapeError("contextual_stream: vocab sizes differ (" + std::to_string(logits_rq.size()) +
                     " vs " + std::to_string(logits_q.size()) + ")");
  }
  return contrast(log_softmax(logits_rq), log_softmax(logits_q));
}

HeadSet head_set(const LogProbVector& q_para, const ContrastVector& q_cont, std::size_t head_k) {
  if (q_para.size() != q_cont.size()) throw ShapeError("head_set: vocab sizes differ");
  if (head_k == 0 || head_k > q_para.size()) {
    throw InvalidArgument("head_set: k=" + std::to_string(head_k) + " outside [1, " +
                          std::to_string(q_para.size()) + "]");
  }
  HeadSet head;
  append_at_or_above(q_para.values, head_k, head.ids);
  append_at_or_above(q_cont.values, head_k, head.ids);
  std::sort(head.ids.begin(), head.ids.end());
  head.ids.erase(std::unique(head.ids.begin(), head.ids.end()), head.ids.end());
  return head;
}

LogitVector fuse(const LogProbVector& q_para, const ContrastVector& q_cont, double alpha,
                 const HeadSet& head) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw InvalidArgument("fuse: alpha must lie in [0,1], got " + std::to_string(alpha));
  }
  if (q_para.size() != q_cont.size()) throw ShapeError("fuse: vocab sizes differ");
  if (head.ids.empty()) throw InvalidArgument("fuse: empty head set");
  LogitVector out;
  out.values.assign(q_para.size(), -std::numeric_limits<double>::infinity());
  for (TokenId id : head.ids) {
    if (id >= q_para.size()) throw InvalidArgument("fuse: head id out of range");
    out.values[id] = alpha * q_para.values[id] + (1.0 - alpha) * q_cont.values[id];
  }
  return out;
}

double adaptive_alpha(double h_para, double h_cont) {
  if (!std::isfinite(h_para) || !std::isfinite(h_cont) || h_para < 0.0 || h_cont < 0.0) {
    throw InvalidInput("adaptive_alpha: entropies must be finite and non-negative");
  }
  const double total = h_para + h_cont;
  if (total == 0.0) return 0.5;
  return h_cont / total;
}

ModulationResult modulated_distribution(const LogitVector& logits_rq, const LogitVector& logits_q,
                                        const ModulationConfig& config) {
  config.validate();
  if (logits_rq.size() != logits_q.size()) {
    throw ShapeError("modulated_distribution: vocab sizes differ (" +
                     std::to_string(logits_rq.size()) + " vs " + std::to_string(logits_q.size()) +
                     ")");
  }
  const LogProbVector lp_rq = log_softmax(logits_rq);
  const LogProbVector lp_q = parametric_stream(logits_q);
  TokenDistribution p_rq = to_distribution(lp_rq);

  ModulationResult result;
  result.cg = confidence_gain(entropy_bits(to_distribution(lp_q)), entropy_bits(p_rq));
  result.alpha_used = config.mode == AlphaMode::kAdaptive
                          ? adaptive_alpha(result.cg.h_para, result.cg.h_cont)
                          : config.alpha;

  if (!config.enabled || !is_conflict(result.cg, config.policy)) {
    result.dist = std::move(p_rq);
    return result;
  }

  const ContrastVector q_cont = contrast(lp_rq, lp_q);
  const HeadSet head = head_set(lp_q, q_cont, std::min(config.head_k, logits_q.size()));
  result.dist = to_distribution(log_softmax_masked(fuse(lp_q, q_cont, result.alpha_used, head)));
  result.fired = true;
  return result;
}

}  // namespace ckplug
