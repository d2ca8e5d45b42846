// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>

namespace ckplug {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `ckplug` command. Subcommands: generate, eval, sweep,
/// entropy-shift, serve-toy. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ckplug
