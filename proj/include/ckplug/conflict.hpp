// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string_view>

namespace ckplug {

/// Per-step entropies (bits) of the query-only and context+query predictions,
/// and their difference `cg = h_para - h_cont`. Negative gain means the context
/// made the model less certain.
struct ConfidenceGainRecord {
  double h_para = 0.0;
  double h_cont = 0.0;
  double cg = 0.0;
};

/// Detection threshold. A step is a conflict when cg < epsilon * |h_cont|;
/// epsilon = 0 is the plain "cg < 0" rule.
struct ConflictPolicy {
  double epsilon = 0.0;
};

/// Thresholds tuned for specific 7B/8B chat checkpoints.
namespace epsilon_presets {
inline constexpr double kLlama2_7b = -2.0;
inline constexpr double kLlama3_8b = -1.0;
inline constexpr double kMistralV03_7b = -1.0;
inline constexpr double kQwen25_7b = -3.0;
}  // namespace epsilon_presets

/// Looks up a preset by a checkpoint name as a backend reports it
/// (case-insensitive substring match, e.g. "meta-llama/Llama-2-7b-chat-hf").
std::optional<double> epsilon_preset_for(std::string_view model_name);

/// Throws InvalidInput on negative or non-finite entropies.
ConfidenceGainRecord confidence_gain(double h_para, double h_cont);

bool is_conflict(const ConfidenceGainRecord& rec, const ConflictPolicy& policy);

}  // namespace ckplug
