// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#include <unicode/unistr.h>

#include <algorithm>
#include <map>
#include <set>

#include "ckplug/errors.hpp"
#include "ckplug/evalkit.hpp"

namespace ckplug {

namespace {

constexpr std::size_t kMinCommonLength = 3;

std::u32string to_u32(std::string_view s) {
  const icu::UnicodeString us = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
  std::u32string out;
  for (int32_t i = 0; i < us.length();) {
    const UChar32 c = us.char32At(i);
    out.push_back(static_cast<char32_t>(c));
    i += U16_LENGTH(c);
  }
  return out;
}

std::string to_utf8(const std::u32string& s) {
  icu::UnicodeString us;
  for (char32_t c : s) us.append(static_cast<UChar32>(c));
  std::string out;
  us.toUTF8String(out);
  return out;
}

bool within(const std::string& token, const std::string& answer) {
  return !token.empty() && answer.find(token) != std::string::npos;
}

}  // namespace

std::vector<std::string> common_substrings(std::string_view s_cont, std::string_view s_para) {
  const std::u32string a = to_u32(s_cont);
  const std::u32string b = to_u32(s_para);
  // run[i][j]: length of the common run ending at a[i-1], b[j-1].
  std::vector<std::vector<std::size_t>> run(a.size() + 2, std::vector<std::size_t>(b.size() + 2, 0));
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1]) run[i][j] = run[i - 1][j - 1] + 1;
    }
  }
  std::set<std::u32string> candidates;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t len = run[i][j];
      const bool extends_right = i < a.size() && j < b.size() && a[i] == b[j];
      if (len >= kMinCommonLength && !extends_right) candidates.insert(a.substr(i - len, len));
    }
  }
  std::vector<std::string> out;
  for (const std::u32string& c : candidates) {
    const bool contained = std::any_of(candidates.begin(), candidates.end(), [&c](const std::u32string& other) {
      return other.size() > c.size() && other.find(c) != std::u32string::npos;
    });
    if (!contained) out.push_back(to_utf8(c));
  }
  return out;
}

CaptureResult capture_knowledge_tokens(std::span<const std::vector<Candidate>> steps, std::string_view s_cont,
                                       std::string_view s_para, const TokenDecoder& decode) {
  const std::string cont = normalize(s_cont);
  const std::string para = normalize(s_para);
  const std::vector<std::string> common = common_substrings(cont, para);

  std::map<TokenId, std::string> memo;
  auto text = [&](TokenId id) -> const std::string& {
    auto it = memo.find(id);
    if (it == memo.end()) it = memo.emplace(id, normalize(decode(id))).first;
    return it->second;
  };
  auto indistinguishable = [&common](const std::string& t) {
    return std::any_of(common.begin(), common.end(), [&t](const std::string& c) { return within(t, c); });
  };
  auto by_prob = [](const Candidate& x, const Candidate& y) {
    return x.prob > y.prob || (x.prob == y.prob && x.id < y.id);
  };

  CaptureResult result;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (steps[i].empty()) continue;
    std::vector<Candidate> ranked = steps[i];
    std::sort(ranked.begin(), ranked.end(), by_prob);
    const std::string& top = text(ranked.front().id);
    if (!within(top, cont) && !within(top, para)) continue;

    for (const Candidate& c : ranked) {
      const std::string& t = text(c.id);
      if (!result.p_cont && !result.p_para && indistinguishable(t)) break;
      if (!result.p_cont && within(t, cont)) {
        result.p_cont = c.prob;
        if (!result.position) result.position = i;
      }
      if (!result.p_para && within(t, para)) {
        result.p_para = c.prob;
        if (!result.position) result.position = i;
      }
    }
  }
  return result;
}

CaptureResult knowledge_token_capture(const GenerationTrace& trace, std::string_view s_cont, std::string_view s_para,
                                      const Backend& backend) {
  if (!trace.spec.capture) throw InvalidArgument("knowledge_token_capture: trace was not recorded in capture mode");
  std::vector<std::vector<Candidate>> steps;
  steps.reserve(trace.steps.size());
  for (const DecodeStep& s : trace.steps) steps.push_back(s.stored_distribution);
  return capture_knowledge_tokens(steps, s_cont, s_para, [&backend](TokenId id) {
    return backend.decode(std::span<const TokenId>(&id, 1));
  });
}

TokenLexicon::TokenLexicon(const Backend& backend) {
  const std::size_t n = backend.meta().vocab_size;
  texts_.reserve(n);
  for (TokenId id = 0; id < n; ++id) texts_.push_back(normalize(backend.decode(std::span<const TokenId>(&id, 1))));
}

std::vector<TokenId> TokenLexicon::ids_within(std::span<const std::string> answers) const {
  std::vector<std::string> normalized;
  for (const std::string& a : answers) {
    std::string n = normalize(a);
    if (!n.empty()) normalized.push_back(std::move(n));
  }
  std::vector<TokenId> out;
  for (TokenId id = 0; id < texts_.size(); ++id) {
    if (std::any_of(normalized.begin(), normalized.end(), [&](const std::string& a) { return within(texts_[id], a); })) {
      out.push_back(id);
    }
  }
  return out;
}

}  // namespace ckplug
