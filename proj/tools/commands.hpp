// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace saeaudit::cli {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::size_t jobs = 1;
    bool strict = false;
    std::string precision;  // empty: keep the stored precision
    std::vector<std::string> overrides;
    std::map<std::string, std::string> inputs;  // corpus, test_corpus, model, sae
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitDegenerate = 3;

std::vector<std::string> command_names();
std::string command_description(const std::string& name);

// Runs one subcommand. Errors are reported on stderr as
// "saeaudit <command>: <message>" and map to kExitError; with --strict, runs
// that raise degeneracy flags return kExitDegenerate.
int run_command(const std::string& name, const CommonOptions& options);

}  // namespace saeaudit::cli
