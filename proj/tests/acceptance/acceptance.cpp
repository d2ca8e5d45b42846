// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ckplug/backend.hpp"
#include "ckplug/cli.hpp"
#include "ckplug/conflict.hpp"
#include "ckplug/dist_math.hpp"
#include "ckplug/evalkit.hpp"
#include "ckplug/modulator.hpp"
#include "support.hpp"

namespace ckplug {
namespace {

struct Outcome {
  bool ok = true;
  std::string detail;
};

using Check = std::function<Outcome()>;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

Outcome entropy_and_softmax() {
  double worst_entropy = 0.0;
  for (std::size_t n : {2u, 4u, 16u, 1024u}) {
    TokenDistribution d;
    d.probs.assign(n, 1.0 / static_cast<double>(n));
    worst_entropy = std::max(worst_entropy, std::abs(entropy_bits(d) - std::log2(static_cast<double>(n))));
  }
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> shift(-50.0, 50.0);
  double worst_shift = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const LogitVector v = testing::random_logits(rng, 1 + rng() % 200);
    LogitVector w = v;
    const double c = shift(rng);
    for (double& x : w.values) x += c;
    const LogProbVector a = log_softmax(v), b = log_softmax(w);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      worst_shift = std::max(worst_shift, std::abs(a.values[i] - b.values[i]));
    }
  }
  return {worst_entropy <= 1e-9 && worst_shift <= 1e-9,
          "max entropy err " + fmt(worst_entropy) + ", max shift err " + fmt(worst_shift)};
}

Outcome fusion_endpoints() {
  std::mt19937_64 rng(102);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 10 + rng() % 100;
    const LogitVector rq = testing::random_logits(rng, n), q = testing::random_logits(rng, n);
    const LogProbVector para = parametric_stream(q);
    const ContrastVector cont = contextual_stream(rq, q);
    const HeadSet head = head_set(para, cont, 1 + rng() % 10);
    const LogitVector one = fuse(para, cont, 1.0, head), zero = fuse(para, cont, 0.0, head);
    for (TokenId id : head.ids) {
      worst = std::max(worst, std::abs(one.values[id] - para.values[id]));
      worst = std::max(worst, std::abs(zero.values[id] - cont.values[id]));
    }
  }
  return {worst <= 1e-12, "max err " + fmt(worst)};
}

Outcome half_alpha_argmax() {
  std::mt19937_64 rng(103);
  const std::size_t ks[] = {1, 5, 10};
  int mismatches = 0;
  for (int t = 0; t < 10000; ++t) {
    const std::size_t n = 10 + rng() % 200;
    const LogitVector rq = testing::random_logits(rng, n), q = testing::random_logits(rng, n);
    const LogProbVector para = parametric_stream(q), rag = log_softmax(rq);
    const ContrastVector cont = contextual_stream(rq, q);
    const HeadSet head = head_set(para, cont, ks[t % 3]);
    const LogitVector fused = fuse(para, cont, 0.5, head);
    TokenId best_rag = head.ids.front();
    for (TokenId id : head.ids) {
      if (rag.values[id] > rag.values[best_rag]) best_rag = id;
    }
    if (argmax(fused.values) != best_rag) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches in 10000"};
}

Outcome passthrough() {
  std::mt19937_64 rng(104);
  int cases = 0, differing = 0;
  while (cases < 1000) {
    const std::size_t n = 2 + rng() % 100;
    const LogitVector rq = testing::random_logits(rng, n, 8.0), q = testing::random_logits(rng, n, 2.0);
    const ModulationResult r = modulated_distribution(rq, q, ModulationConfig::fixed(1.0));
    if (r.fired) continue;
    ++cases;
    const TokenDistribution ref = softmax(rq);
    if (r.dist.size() != ref.size() ||
        std::memcmp(r.dist.probs.data(), ref.probs.data(), ref.size() * sizeof(double)) != 0) {
      ++differing;
    }
  }
  return {differing == 0, std::to_string(differing) + " of 1000 differ"};
}

Outcome adaptive_alpha_bounds() {
  std::mt19937_64 rng(105);
  std::uniform_real_distribution<double> h(0.0, 12.0);
  int out_of_range = 0;
  for (int t = 0; t < 10000; ++t) {
    double a = h(rng), b = h(rng);
    if (t % 10 == 0) a = 0.0;
    if (t % 10 == 1) b = 0.0;
    const double alpha = adaptive_alpha(a, b);
    if (!(alpha >= 0.0 && alpha <= 1.0)) ++out_of_range;
  }
  bool equal_ok = true;
  for (double v : {1e-9, 0.3, 1.0, 2.5, 10.0}) equal_ok = equal_ok && adaptive_alpha(v, v) == 0.5;
  const bool ends_ok = adaptive_alpha(0.0, 2.0) == 1.0 && adaptive_alpha(2.0, 0.0) == 0.0;
  return {out_of_range == 0 && equal_ok && ends_ok,
          std::to_string(out_of_range) + " out of range; equal " + (equal_ok ? "ok" : "bad") + "; ends " +
              (ends_ok ? "ok" : "bad")};
}

Outcome zero_epsilon_rule() {
  std::mt19937_64 rng(106);
  std::uniform_real_distribution<double> h(0.0, 10.0);
  int disagreements = 0;
  for (int t = 0; t < 10000; ++t) {
    const double hp = h(rng), hc = t % 7 == 0 ? hp : h(rng);
    const ConfidenceGainRecord rec = confidence_gain(hp, hc);
    if (is_conflict(rec, ConflictPolicy{0.0}) != (rec.cg < 0.0)) ++disagreements;
  }
  return {disagreements == 0, std::to_string(disagreements) + " disagreements in 10000"};
}

Outcome capture_oracle() {
  std::mt19937_64 rng(107);
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    const testing::CaptureCase c = testing::random_capture_case(rng);
    const auto decode = [&c](TokenId id) { return c.vocab.at(id); };
    const CaptureResult got = capture_knowledge_tokens(c.steps, c.s_cont, c.s_para, decode);
    const testing::OracleCapture want = testing::brute_force_capture(c.steps, c.s_cont, c.s_para, decode);
    if (got.p_cont != want.p_cont || got.p_para != want.p_para || got.position != want.position) ++mismatches;
  }
  return {mismatches == 0, std::to_string(mismatches) + " mismatches in 1000"};
}

const ToyBackend& capitals() {
  static const ToyBackend backend(load_toy_spec(testing::data_path("toy/facts.json")));
  return backend;
}

const std::vector<EvalRecord>& facts() {
  static const std::vector<EvalRecord> records = load_dataset(testing::data_path("datasets/facts.jsonl"));
  return records;
}

Outcome toy_memorization() {
  const std::vector<double> grid = {0.0, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> mrs;
  std::string detail = std::to_string(facts().size()) + " records; MR";
  bool complete = true;
  for (double a : grid) {
    EvalOptions o;
    o.config = ModulationConfig::fixed(a);
    const EvalRun run = evaluate(facts(), capitals(), o);
    const MetricsTable m = aggregate_metrics(run.outcomes);
    complete = complete && run.failures.empty() && m.mr.has_value();
    mrs.push_back(m.mr.value_or(std::numeric_limits<double>::quiet_NaN()));
    detail += " " + fmt(mrs.back());
  }
  bool monotone = true;
  for (std::size_t i = 1; i < mrs.size(); ++i) monotone = monotone && mrs[i] >= mrs[i - 1];
  return {complete && facts().size() >= 20 && mrs.front() <= 10.0 && mrs.back() >= 90.0 && monotone, detail};
}

Outcome entropy_shift_sign() {
  const EvalOptions o;
  const auto support = entropy_shift_report(facts(), capitals(), o, ContextVariant::kSupport);
  const auto conflict = entropy_shift_report(facts(), capitals(), o, ContextVariant::kConflict);
  const auto s = mean_shift(support), c = mean_shift(conflict);
  if (!s || !c) return {false, "no capturable rows"};
  return {*s < 0.0 && *c > 0.0, "support " + fmt(*s) + "%, conflict " + fmt(*c) + "%"};
}

Outcome mr_arithmetic() {
  const std::optional<double> mr = memorization_ratio(8.6, 61.6);
  if (!mr) return {false, "undefined"};
  return {std::abs(*mr - 12.3) <= 0.1, "MR " + fmt(*mr)};
}

Outcome eval_determinism() {
  const std::string backend = "toy:" + testing::data_path("toy/facts.json").string();
  const std::string dataset = testing::data_path("datasets/facts.jsonl").string();
  std::string csv[2];
  for (int i = 0; i < 2; ++i) {
    const std::string dir = testing::scratch_dir("acceptance-eval").string();
    const std::vector<std::string> args = {"ckplug", "eval",       "--backend", backend, "--dataset",
                                           dataset,  "--alpha",    "0.25",      "--out", dir,
                                           "--mode", "sample",     "--seed",    "7"};
    std::vector<const char*> argv;
    for (const std::string& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != kExitOk) return {false, "exit " + std::to_string(code) + ": " + err.str()};
    csv[i] = testing::read_file(dir + "/metrics.csv");
  }
  return {!csv[0].empty() && csv[0] == csv[1], std::to_string(csv[0].size()) + " bytes, identical " +
                                                   (csv[0] == csv[1] ? "yes" : "no")};
}

struct Criterion {
  const char* name;
  double budget_s;
  Check check;
};

}  // namespace
}  // namespace ckplug

int main() {
  using namespace ckplug;
  constexpr double kNoBudget = 0.0;
  const std::vector<Criterion> criteria = {
      {"entropy-softmax", 1.0, entropy_and_softmax},
      {"fusion-endpoints", 1.0, fusion_endpoints},
      {"half-alpha-argmax", 5.0, half_alpha_argmax},
      {"passthrough-bit-identical", kNoBudget, passthrough},
      {"adaptive-alpha", kNoBudget, adaptive_alpha_bounds},
      {"zero-epsilon-rule", kNoBudget, zero_epsilon_rule},
      {"capture-oracle", 10.0, capture_oracle},
      {"toy-memorization-ratio", 30.0, toy_memorization},
      {"entropy-shift-sign", kNoBudget, entropy_shift_sign},
      {"mr-arithmetic", kNoBudget, mr_arithmetic},
      {"eval-determinism", kNoBudget, eval_determinism},
  };
  int failed = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double took = seconds_since(start);
    const bool in_time = c.budget_s == kNoBudget || took <= c.budget_s;
    const bool pass = o.ok && in_time;
    if (!pass) ++failed;
    std::cout << (pass ? "PASS " : "FAIL ") << c.name << " (" << o.detail << "; " << fmt(took) << " s";
    if (c.budget_s != kNoBudget) std::cout << " of " << fmt(c.budget_s) << " s";
    std::cout << ")\n";
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << "\n";
  return failed == 0 ? 0 : 1;
}
