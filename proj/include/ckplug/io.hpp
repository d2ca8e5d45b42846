// Copyright 2026 The ckplug Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string_view>

namespace ckplug {

/// Writes `content` to a sibling temp file and renames it over `path`, so
/// readers never observe a truncated file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace ckplug
