// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "saeaudit/io.hpp"

#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "saeaudit/error.hpp"

namespace saeaudit {

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::io, fmt::format("cannot open '{}'", path.string()));
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
    auto tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), ErrorCode::io, fmt::format("cannot open '{}' for writing", tmp.string()));
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        require(out.good(), ErrorCode::io, fmt::format("write to '{}' failed", tmp.string()));
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace saeaudit
