// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#include "ckplug/engine.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <cmath>
#include <numeric>

namespace ckplug {

namespace {

using nlohmann::json;

constexpr std::size_t kTopCandidates = 5;

std::string render_background_qa(std::string_view context, std::string_view query) {
  std::string out = "Background: ";
  out += context;
  out += "\n\nQ: ";
  out += query;
  out += "\n\nA:";
  return out;
}

std::string render_query_only(std::string_view query) {
  std::string out = "Q: ";
  out += query;
  out += "\n\nA:";
  return out;
}

std::string render_background_qa_elide(std::string_view context, std::string_view query) {
  if (context.empty()) return render_query_only(query);
  return render_background_qa(context, query);
}

const std::array<PromptTemplate, 2> kTemplates{{
    {"background-qa", &render_background_qa, &render_query_only},
    {"background-qa-elide", &render_background_qa_elide, &render_query_only},
}};

// Ids ordered by descending probability, lower id first on ties.
std::vector<TokenId> ranked_ids(const TokenDistribution& dist) {
  std::vector<TokenId> order(dist.size());
  std::iota(order.begin(), order.end(), TokenId{0});
  std::stable_sort(order.begin(), order.end(),
                   [&dist](TokenId a, TokenId b) { return dist.probs[a] > dist.probs[b]; });
  return order;
}

std::vector<Candidate> top_of(const TokenDistribution& dist, const std::vector<TokenId>& ranked, std::size_t n) {
  std::vector<Candidate> out;
  for (std::size_t i = 0; i < std::min(n, ranked.size()); ++i) out.push_back({ranked[i], dist.probs[ranked[i]]});
  return out;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

json candidates_to_json(const std::vector<Candidate>& cands) {
  json out = json::array();
  for (const Candidate& c : cands) out.push_back(json::array({c.id, c.prob}));
  return out;
}

std::vector<Candidate> candidates_from_json(const json& arr) {
  std::vector<Candidate> out;
  for (const json& pair : arr) out.push_back({pair.at(0).get<TokenId>(), pair.at(1).get<double>()});
  return out;
}

}  // namespace

const PromptTemplate& find_template(std::string_view id) {
  for (const PromptTemplate& t : kTemplates) {
    if (t.id == id) return t;
  }
  throw InvalidArgument("unknown prompt template '" + std::string(id) + "'");
}

std::vector<std::string> template_ids() {
  std::vector<std::string> out;
  for (const PromptTemplate& t : kTemplates) out.push_back(t.id);
  return out;
}

TokenId select_token(const TokenDistribution& dist, const DecodeOptions& options, std::mt19937_64& rng) {
  if (dist.probs.empty()) throw InvalidInput("select_token: empty distribution");
  if (options.mode == DecodeMode::kGreedy) return static_cast<TokenId>(argmax(dist.probs));

  if (options.sample_k == 0) throw InvalidArgument("select_token: sample_k must be at least 1");
  const std::vector<TokenId> ranked = ranked_ids(dist);
  const std::size_t k = std::min(options.sample_k, ranked.size());
  double mass = 0.0;
  for (std::size_t i = 0; i < k; ++i) mass += dist.probs[ranked[i]];
  assert(mass > 0.0 && "modulator never emits an all-zero distribution");
  if (!(mass > 0.0)) throw InvalidInput("select_token: top-k mass is zero");

  const double target = uniform01(rng) * mass;
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    acc += dist.probs[ranked[i]];
    if (target < acc) return ranked[i];
  }
  // Rounding left target at the very top; take the last id with mass.
  for (std::size_t i = k; i-- > 0;) {
    if (dist.probs[ranked[i]] > 0.0) return ranked[i];
  }
  return ranked[0];
}

void SessionSpec::validate() const {
  config.validate();
  if (max_new_tokens == 0) throw InvalidArgument("max_new_tokens must be at least 1");
  if (decode.mode == DecodeMode::kTopKSample && decode.sample_k == 0) {
    throw InvalidArgument("sample_k must be at least 1 when sampling");
  }
  if (capture && capture_top_n == 0) throw InvalidArgument("capture_top_n must be at least 1");
  find_template(template_id);
}

std::string_view to_string(StopReason reason) { return reason == StopReason::kEos ? "eos" : "max_tokens"; }

Session::Session(const Backend& backend, SessionSpec spec)
    : backend_(backend), spec_(std::move(spec)), rng_(spec_.decode.seed) {
  spec_.validate();
  meta_ = backend_.meta();
  const PromptTemplate& tmpl = find_template(spec_.template_id);
  rag_prefix_ = backend_.encode(tmpl.render_rag(spec_.context, spec_.query));
  query_prefix_ = backend_.encode(tmpl.render_query_only(spec_.query));
  for (const auto* prefix : {&rag_prefix_, &query_prefix_}) {
    for (TokenId id : *prefix) {
      if (id >= meta_.vocab_size) throw BackendError("internal", "tokenizer returned id outside the vocabulary");
    }
  }
  for (TokenId id : spec_.capture_keep_ids) {
    if (id >= meta_.vocab_size) throw InvalidArgument("capture_keep_ids contains an id outside the vocabulary");
  }
}

DecodeStep Session::step() {
  if (finished_) throw StateError("step() called on a finished session");

  std::vector<TokenId> rag = rag_prefix_;
  rag.insert(rag.end(), generated_.begin(), generated_.end());
  std::vector<TokenId> query = query_prefix_;
  query.insert(query.end(), generated_.begin(), generated_.end());

  const LogitVector logits_rq = backend_.next_logits(rag);
  const LogitVector logits_q = backend_.next_logits(query);
  if (logits_rq.size() != meta_.vocab_size || logits_q.size() != meta_.vocab_size) {
    throw ShapeError("backend returned logits of the wrong length");
  }
  ModulationResult mod = modulated_distribution(logits_rq, logits_q, spec_.config);
  const TokenId chosen = select_token(mod.dist, spec_.decode, rng_);

  DecodeStep s;
  s.position = steps_.size();
  s.token_id = chosen;
  s.token_text = backend_.decode(std::span<const TokenId>(&chosen, 1));
  s.cg = mod.cg;
  s.fired = mod.fired;
  s.alpha_used = mod.alpha_used;
  s.dist_entropy_bits = entropy_bits(mod.dist);
  const std::vector<TokenId> ranked = ranked_ids(mod.dist);
  s.top_candidates = top_of(mod.dist, ranked, kTopCandidates);
  if (spec_.capture) {
    std::vector<bool> keep(mod.dist.size(), false);
    for (std::size_t i = 0; i < std::min(spec_.capture_top_n, ranked.size()); ++i) keep[ranked[i]] = true;
    for (TokenId id : spec_.capture_keep_ids) keep[id] = true;
    for (TokenId id : ranked) {
      if (keep[id]) s.stored_distribution.push_back({id, mod.dist.probs[id]});
    }
  }

  generated_.push_back(chosen);
  steps_.push_back(s);
  if (chosen == meta_.eos_token_id) {
    finished_ = true;
    stop_reason_ = StopReason::kEos;
  } else if (generated_.size() >= spec_.max_new_tokens) {
    finished_ = true;
    stop_reason_ = StopReason::kMaxTokens;
  }
  return s;
}

GenerationTrace Session::generate() {
  auto snapshot = [this] {
    GenerationTrace t;
    t.spec = spec_;
    t.steps = steps_;
    t.stop_reason = stop_reason_;
    std::span<const TokenId> ids(generated_);
    if (stop_reason_ == StopReason::kEos && finished_ && !ids.empty()) ids = ids.first(ids.size() - 1);
    t.final_text = backend_.decode(ids);
    return t;
  };
  try {
    while (!finished_) step();
  } catch (const std::exception& e) {
    GenerationTrace partial;
    try {
      partial = snapshot();
    } catch (const std::exception&) {
      partial.spec = spec_;
      partial.steps = steps_;
    }
    throw GenerationError(e.what(), std::move(partial));
  }
  return snapshot();
}

json spec_to_json(const SessionSpec& spec) {
  return json{
      {"context", spec.context},
      {"query", spec.query},
      {"template", spec.template_id},
      {"modulation", spec.config.enabled},
      {"alpha_mode", spec.config.mode == AlphaMode::kAdaptive ? "adaptive" : "fixed"},
      {"alpha", spec.config.alpha},
      {"head_k", spec.config.head_k},
      {"epsilon", spec.config.policy.epsilon},
      {"max_new_tokens", spec.max_new_tokens},
      {"decode_mode", spec.decode.mode == DecodeMode::kGreedy ? "greedy" : "sample"},
      {"sample_k", spec.decode.sample_k},
      {"seed", spec.decode.seed},
      {"capture", spec.capture},
      {"capture_top_n", spec.capture_top_n},
      {"capture_keep_ids", spec.capture_keep_ids},
  };
}

json trace_to_json(const GenerationTrace& trace) {
  json steps = json::array();
  for (const DecodeStep& s : trace.steps) {
    json j{
        {"position", s.position},
        {"token_id", s.token_id},
        {"token_text", s.token_text},
        {"h_para", s.cg.h_para},
        {"h_cont", s.cg.h_cont},
        {"cg", s.cg.cg},
        {"fired", s.fired},
        {"alpha_used", s.alpha_used},
        {"entropy_bits", s.dist_entropy_bits},
        {"top", candidates_to_json(s.top_candidates)},
    };
    if (trace.spec.capture) j["stored"] = candidates_to_json(s.stored_distribution);
    steps.push_back(std::move(j));
  }
  return json{{"spec", spec_to_json(trace.spec)},
              {"steps", std::move(steps)},
              {"final_text", trace.final_text},
              {"stop_reason", to_string(trace.stop_reason)}};
}

GenerationTrace trace_from_json(const json& doc) {
  try {
    GenerationTrace t;
    const json& sp = doc.at("spec");
    t.spec.context = sp.at("context").get<std::string>();
    t.spec.query = sp.at("query").get<std::string>();
    t.spec.template_id = sp.at("template").get<std::string>();
    t.spec.config.enabled = sp.at("modulation").get<bool>();
    t.spec.config.mode = sp.at("alpha_mode") == "adaptive" ? AlphaMode::kAdaptive : AlphaMode::kFixed;
    t.spec.config.alpha = sp.at("alpha").get<double>();
    t.spec.config.head_k = sp.at("head_k").get<std::size_t>();
    t.spec.config.policy.epsilon = sp.at("epsilon").get<double>();
    t.spec.max_new_tokens = sp.at("max_new_tokens").get<std::size_t>();
    t.spec.decode.mode = sp.at("decode_mode") == "sample" ? DecodeMode::kTopKSample : DecodeMode::kGreedy;
    t.spec.decode.sample_k = sp.at("sample_k").get<std::size_t>();
    t.spec.decode.seed = sp.at("seed").get<std::uint64_t>();
    t.spec.capture = sp.at("capture").get<bool>();
    t.spec.capture_top_n = sp.at("capture_top_n").get<std::size_t>();
    t.spec.capture_keep_ids = sp.at("capture_keep_ids").get<std::vector<TokenId>>();
    for (const json& j : doc.at("steps")) {
      DecodeStep s;
      s.position = j.at("position").get<std::size_t>();
      s.token_id = j.at("token_id").get<TokenId>();
      s.token_text = j.at("token_text").get<std::string>();
      s.cg = {j.at("h_para").get<double>(), j.at("h_cont").get<double>(), j.at("cg").get<double>()};
      s.fired = j.at("fired").get<bool>();
      s.alpha_used = j.at("alpha_used").get<double>();
      s.dist_entropy_bits = j.at("entropy_bits").get<double>();
      s.top_candidates = candidates_from_json(j.at("top"));
      if (j.contains("stored")) s.stored_distribution = candidates_from_json(j.at("stored"));
      t.steps.push_back(std::move(s));
    }
    t.final_text = doc.at("final_text").get<std::string>();
    t.stop_reason = doc.at("stop_reason") == "eos" ? StopReason::kEos : StopReason::kMaxTokens;
    return t;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("trace: ") + e.what());
  }
}

}  // namespace ckplug
