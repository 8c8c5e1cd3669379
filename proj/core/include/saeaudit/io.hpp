// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace saeaudit {

std::string read_text_file(const std::filesystem::path& path);

// Writes a sibling "<path>.partial" and renames it over `path`.
void write_text_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace saeaudit
