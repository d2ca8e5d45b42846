// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <string>
#include <vector>

#include "ckplug/errors.hpp"
#include "ckplug/evalkit.hpp"

namespace ckplug {

namespace {

bool is_separator(UChar32 c) {
  return u_ispunct(c) || u_isUWhiteSpace(c) || u_iscntrl(c) || c == 0xFFFD;
}

const icu::Normalizer2& nfkd() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFKDInstance(status);
  if (U_FAILURE(status)) throw Error(std::string("ICU NFKD unavailable: ") + u_errorName(status));
  return *n;
}

const icu::Normalizer2& nfkc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status)) throw Error(std::string("ICU NFKC unavailable: ") + u_errorName(status));
  return *n;
}

struct RawWord {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Maximal runs of non-separator code points, as byte spans.
std::vector<RawWord> raw_words(std::string_view text) {
  std::vector<RawWord> words;
  const auto* s = reinterpret_cast<const uint8_t*>(text.data());
  const int32_t len = static_cast<int32_t>(text.size());
  int32_t i = 0;
  constexpr std::size_t kNone = std::string_view::npos;
  std::size_t start = kNone;
  while (i < len) {
    const int32_t at = i;
    UChar32 c;
    U8_NEXT(s, i, len, c);
    if (c < 0) c = 0xFFFD;
    if (is_separator(c)) {
      if (start != kNone) words.push_back({start, static_cast<std::size_t>(at)});
      start = kNone;
    } else if (start == kNone) {
      start = static_cast<std::size_t>(at);
    }
  }
  if (start != kNone) words.push_back({start, text.size()});
  return words;
}

std::vector<std::string> split_words(const std::string& normalized) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < normalized.size()) {
    const std::size_t j = normalized.find(' ', i);
    const std::size_t end = j == std::string::npos ? normalized.size() : j;
    if (end > i) out.push_back(normalized.substr(i, end - i));
    i = end + 1;
  }
  return out;
}

}  // namespace

std::string normalize(std::string_view text) {
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString s = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  s = nfkd().normalize(s, status);

  icu::UnicodeString stripped;
  for (int32_t i = 0; i < s.length();) {
    const UChar32 c = s.char32At(i);
    if (u_charType(c) != U_NON_SPACING_MARK) stripped.append(c);
    i += U16_LENGTH(c);
  }
  stripped = nfkc().normalize(stripped, status);
  if (U_FAILURE(status)) throw Error(std::string("ICU normalization failed: ") + u_errorName(status));
  stripped.toLower(icu::Locale::getRoot());

  icu::UnicodeString collapsed;
  bool pending_space = false;
  for (int32_t i = 0; i < stripped.length();) {
    const UChar32 c = stripped.char32At(i);
    i += U16_LENGTH(c);
    if (is_separator(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !collapsed.isEmpty()) collapsed.append(static_cast<UChar>(' '));
    pending_space = false;
    collapsed.append(c);
  }
  std::string out;
  collapsed.toUTF8String(out);
  return out;
}

bool answer_match(std::string_view output, std::string_view answer, std::span<const std::string> aliases) {
  const std::string haystack = " " + normalize(output) + " ";
  auto matches = [&haystack](std::string_view candidate) {
    const std::string needle = normalize(candidate);
    if (needle.empty()) return false;
    return haystack.find(" " + needle + " ") != std::string::npos;
  };
  if (matches(answer)) return true;
  for (const std::string& alias : aliases) {
    if (matches(alias)) return true;
  }
  return false;
}

EvalRecord build_counterfactual(const EvalRecord& original, std::string_view substitute) {
  const std::vector<std::string> gold = split_words(normalize(original.parametric_answer));
  if (gold.empty()) throw InvalidInput("build_counterfactual: parametric answer normalizes to nothing");
  if (normalize(substitute).empty()) throw InvalidArgument("build_counterfactual: substitute normalizes to nothing");

  // Flatten context words into normalized sub-words that remember their raw span.
  struct Piece {
    std::string word;
    RawWord span;
  };
  std::vector<Piece> pieces;
  for (const RawWord& w : raw_words(original.context)) {
    for (std::string& sub : split_words(normalize(original.context.substr(w.begin, w.end - w.begin)))) {
      pieces.push_back({std::move(sub), w});
    }
  }

  std::vector<RawWord> hits;
  for (std::size_t i = 0; i + gold.size() <= pieces.size();) {
    bool match = true;
    for (std::size_t j = 0; j < gold.size() && match; ++j) match = pieces[i + j].word == gold[j];
    if (match) {
      hits.push_back({pieces[i].span.begin, pieces[i + gold.size() - 1].span.end});
      i += gold.size();
    } else {
      ++i;
    }
  }
  if (hits.empty()) {
    throw InvalidInput("build_counterfactual: answer '" + original.parametric_answer + "' does not occur in the context of " +
                       original.id);
  }

  EvalRecord out = original;
  out.contextual_answer = std::string(substitute);
  out.contextual_aliases.clear();
  if (substitute == original.parametric_answer) return out;
  std::string ctx;
  std::size_t cursor = 0;
  for (const RawWord& h : hits) {
    if (h.begin < cursor) continue;  // pieces of one raw word matched twice
    ctx.append(original.context, cursor, h.begin - cursor);
    ctx.append(substitute);
    cursor = h.end;
  }
  ctx.append(original.context, cursor, std::string::npos);
  out.context = std::move(ctx);
  return out;
}

}  // namespace ckplug
