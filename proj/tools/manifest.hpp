// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "config.hpp"

namespace saeaudit::cli {

// Files a command writes into its output directory. Unless commit() is
// called, the destructor removes every registered file (and the directory
// itself when this run created it), so a failed command leaves nothing
// behind.
class OutputDir {
public:
    explicit OutputDir(std::filesystem::path dir);
    ~OutputDir();
    OutputDir(const OutputDir&) = delete;
    OutputDir& operator=(const OutputDir&) = delete;

    const std::filesystem::path& dir() const { return dir_; }
    std::filesystem::path file(const std::string& name);
    void add(const std::filesystem::path& written);
    const std::vector<std::filesystem::path>& files() const { return files_; }
    void commit() { committed_ = true; }

private:
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> files_;
    bool created_ = false;
    bool committed_ = false;
};

struct RunRecord {
    std::string command;
    std::map<std::string, std::uint64_t> seeds;
    std::vector<std::filesystem::path> inputs;
    std::vector<std::string> flags;  // degeneracy flags raised by the run
};

// manifest.json: command, tool version, effective config and its SHA-256,
// seeds, input digests (plus the digest of each input's sibling manifest
// when present), output digests, and timestamps. Timestamps come from
// SOURCE_DATE_EPOCH and are null when it is unset, keeping reruns
// byte-identical.
void write_manifest(const RunRecord& run, const FlatConfig& config, OutputDir& out);

}  // namespace saeaudit::cli
