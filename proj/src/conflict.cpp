// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#include "ckplug/conflict.hpp"

#include <cctype>
#include <cmath>
#include <string>

#include "ckplug/errors.hpp"

namespace ckplug {

namespace {

// Lowercase and drop separators so "Llama-2-7b" and "llama2_7B" compare equal.
std::string squash(std::string_view name) {
  std::string out;
  for (unsigned char c : name) {
    if (c == '-' || c == '_' || c == '.' || c == ' ') continue;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

}  // namespace

std::optional<double> epsilon_preset_for(std::string_view model_name) {
  const std::string n = squash(model_name);
  auto has = [&n](const char* s) { return n.find(s) != std::string::npos; };
  if (has("llama27b")) return epsilon_presets::kLlama2_7b;
  if (has("llama38b") || has("llama318b")) return epsilon_presets::kLlama3_8b;
  if (has("mistral") && has("7b") && has("v03")) return epsilon_presets::kMistralV03_7b;
  if (has("qwen257b")) return epsilon_presets::kQwen25_7b;
  return std::nullopt;
}

ConfidenceGainRecord confidence_gain(double h_para, double h_cont) {
  if (!std::isfinite(h_para) || !std::isfinite(h_cont) || h_para < 0.0 || h_cont < 0.0) {
    throw InvalidInput("confidence_gain: entropies must be finite and non-negative");
  }
  return {h_para, h_cont, h_para - h_cont};
}

bool is_conflict(const ConfidenceGainRecord& rec, const ConflictPolicy& policy) {
  if (!std::isfinite(policy.epsilon)) throw InvalidInput("is_conflict: epsilon must be finite");
  if (!std::isfinite(rec.cg) || rec.h_para < 0.0 || rec.h_cont < 0.0) {
    throw InvalidInput("is_conflict: malformed confidence-gain record");
  }
  return rec.cg < policy.epsilon * std::abs(rec.h_cont);
}

}  // namespace ckplug
