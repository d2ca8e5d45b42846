// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

#include "ckplug/backend.hpp"
#include "ckplug/errors.hpp"

namespace ckplug {

namespace {

using nlohmann::json;

constexpr std::string_view kContinuation = "##";

bool is_continuation(std::string_view token) { return token.starts_with(kContinuation); }

std::vector<double> parse_row(const json& row, const std::vector<std::string>& vocab,
                              const std::map<std::string, TokenId, std::less<>>& ids,
                              const std::string& where) {
  std::vector<double> out;
  if (row.is_array()) {
    out = row.get<std::vector<double>>();
  } else if (row.is_object()) {
    out.assign(vocab.size(), row.value("default", 0.0));
    const json set = row.value("set", json::object());
    for (const auto& [token, value] : set.items()) {
      auto it = ids.find(token);
      if (it == ids.end()) throw InvalidInput(where + ": unknown token '" + token + "'");
      out[it->second] = value.get<double>();
    }
  } else {
    throw InvalidInput(where + ": logit row must be an array or an object");
  }
  if (out.size() != vocab.size()) {
    throw InvalidInput(where + ": logit row has " + std::to_string(out.size()) +
                       " entries, vocabulary has " + std::to_string(vocab.size()));
  }
  for (double v : out) {
    if (!std::isfinite(v)) throw InvalidInput(where + ": non-finite logit");
  }
  return out;
}

TokenId lookup(const std::map<std::string, TokenId, std::less<>>& ids, const std::string& token,
               const std::string& where) {
  auto it = ids.find(token);
  if (it == ids.end()) throw InvalidInput(where + ": unknown token '" + token + "'");
  return it->second;
}

}  // namespace

ToyModelSpec parse_toy_spec(const nlohmann::json& doc) {
  try {
    if (doc.value("version", 0) != 1) throw InvalidInput("toy spec: expected \"version\": 1");
    ToyModelSpec spec;
    spec.model_name = doc.value("model_name", std::string("toy"));
    spec.vocabulary = doc.at("vocabulary").get<std::vector<std::string>>();
    if (spec.vocabulary.empty()) throw InvalidInput("toy spec: empty vocabulary");

    std::map<std::string, TokenId, std::less<>> ids;
    for (std::size_t i = 0; i < spec.vocabulary.size(); ++i) {
      const std::string& tok = spec.vocabulary[i];
      if (tok.empty() || tok == kContinuation) throw InvalidInput("toy spec: empty token");
      for (unsigned char c : tok) {
        if (std::isspace(c)) throw InvalidInput("toy spec: token '" + tok + "' contains whitespace");
      }
      if (!ids.emplace(tok, static_cast<TokenId>(i)).second) {
        throw InvalidInput("toy spec: duplicate token '" + tok + "'");
      }
    }
    spec.eos_token_id = lookup(ids, doc.at("eos").get<std::string>(), "toy spec eos");
    if (doc.contains("unk")) spec.unk_token_id = lookup(ids, doc.at("unk").get<std::string>(), "toy spec unk");
    spec.max_context_tokens = doc.value("max_context_tokens", spec.max_context_tokens);
    if (spec.max_context_tokens == 0) throw InvalidInput("toy spec: max_context_tokens must be positive");
    spec.fallback = parse_row(doc.at("fallback"), spec.vocabulary, ids, "toy spec fallback");

    const json& transitions = doc.value("transitions", json::array());
    for (std::size_t t = 0; t < transitions.size(); ++t) {
      const std::string where = "toy spec transition " + std::to_string(t);
      ToyTransition tr;
      for (const auto& tok : transitions[t].at("pattern").get<std::vector<std::string>>()) {
        tr.pattern.push_back(lookup(ids, tok, where));
      }
      if (tr.pattern.empty()) throw InvalidInput(where + ": empty pattern");
      tr.logits = parse_row(transitions[t].at("logits"), spec.vocabulary, ids, where);
      spec.transitions.push_back(std::move(tr));
    }
    return spec;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("toy spec: ") + e.what());
  }
}

ToyModelSpec load_toy_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open toy spec " + path.string());
  try {
    return parse_toy_spec(json::parse(in));
  } catch (const json::exception& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

ToyBackend::ToyBackend(ToyModelSpec spec) : spec_(std::move(spec)) {
  const std::size_t n = spec_.vocabulary.size();
  if (n == 0) throw InvalidInput("toy backend: empty vocabulary");
  if (spec_.fallback.size() != n) throw InvalidInput("toy backend: fallback row has wrong length");
  if (spec_.eos_token_id >= n) throw InvalidInput("toy backend: eos id out of range");
  for (std::size_t i = 0; i < n; ++i) ids_.emplace(spec_.vocabulary[i], static_cast<TokenId>(i));
  for (std::size_t t = 0; t < spec_.transitions.size(); ++t) {
    const ToyTransition& tr = spec_.transitions[t];
    if (tr.logits.size() != n) throw InvalidInput("toy backend: transition row has wrong length");
    for (TokenId id : tr.pattern) {
      if (id >= n) throw InvalidInput("toy backend: pattern id out of range");
    }
    // Two identical patterns would tie under longest-match.
    if (!rows_.emplace(tr.pattern, t).second) {
      throw InvalidInput("toy backend: ambiguous duplicate pattern in transition " + std::to_string(t));
    }
    longest_pattern_ = std::max(longest_pattern_, tr.pattern.size());
  }
}

ModelMeta ToyBackend::meta() const {
  return {spec_.vocabulary.size(), spec_.eos_token_id, spec_.model_name, spec_.max_context_tokens};
}

std::optional<TokenId> ToyBackend::token_id(std::string_view token) const {
  auto it = ids_.find(token);
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

std::vector<TokenId> ToyBackend::encode(std::string_view text) const {
  std::vector<TokenId> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t end = i;
    while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) ++end;
    const std::string_view word = text.substr(i, end - i);
    std::size_t pos = 0;
    while (pos < word.size()) {
      std::optional<TokenId> piece;
      std::size_t len = word.size() - pos;
      for (; len > 0; --len) {
        const std::string candidate = pos == 0 ? std::string(word.substr(0, len))
                                               : std::string(kContinuation) + std::string(word.substr(pos, len));
        if (pos == 0 && is_continuation(candidate)) continue;
        if (auto id = token_id(candidate)) {
          piece = id;
          break;
        }
      }
      if (!piece) {
        if (!spec_.unk_token_id) {
          throw BackendError("bad_request", "toy tokenizer: '" + std::string(word) + "' is not in the vocabulary");
        }
        out.push_back(*spec_.unk_token_id);
        break;
      }
      out.push_back(*piece);
      pos += len;
    }
    i = end;
  }
  return out;
}

std::string ToyBackend::decode(std::span<const TokenId> ids) const {
  for (TokenId id : ids) {
    if (id >= spec_.vocabulary.size()) {
      throw BackendError("bad_request", "decode: id " + std::to_string(id) + " is outside the vocabulary");
    }
  }
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::string& tok = spec_.vocabulary[ids[i]];
    if (is_continuation(tok)) {
      out += tok.substr(kContinuation.size());
    } else {
      if (i > 0) out.push_back(' ');
      out += tok;
    }
  }
  return out;
}

LogitVector ToyBackend::next_logits(std::span<const TokenId> prefix) const {
  if (prefix.size() > spec_.max_context_tokens) {
    throw BackendError("context_overflow", "prefix of " + std::to_string(prefix.size()) +
                                               " tokens exceeds " + std::to_string(spec_.max_context_tokens));
  }
  for (TokenId id : prefix) {
    if (id >= spec_.vocabulary.size()) throw BackendError("bad_request", "prefix id out of range");
  }
  for (std::size_t len = std::min(longest_pattern_, prefix.size()); len > 0; --len) {
    std::vector<TokenId> tail(prefix.end() - static_cast<std::ptrdiff_t>(len), prefix.end());
    auto it = rows_.find(tail);
    if (it != rows_.end()) return {spec_.transitions[it->second].logits};
  }
  return {spec_.fallback};
}

}  // namespace ckplug
