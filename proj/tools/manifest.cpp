// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "manifest.hpp"

#include <cstdlib>
#include <ctime>
#include <system_error>

#include <fmt/format.h>
#include <json.hpp>

#include "saeaudit/digest.hpp"
#include "saeaudit/error.hpp"
#include "saeaudit/io.hpp"

namespace saeaudit::cli {
namespace {

nlohmann::ordered_json timestamp() {
    const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
    if (!epoch || !*epoch) return nullptr;
    char* end = nullptr;
    const auto secs = static_cast<std::time_t>(std::strtoll(epoch, &end, 10));
    require(end && *end == '\0', ErrorCode::invalid_argument,
            fmt::format("SOURCE_DATE_EPOCH '{}' is not an integer", epoch));
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return std::string(buf);
}

}  // namespace

OutputDir::OutputDir(std::filesystem::path dir) : dir_(std::move(dir)) {
    require(!dir_.empty(), ErrorCode::invalid_argument, "--out-dir is required");
    if (!std::filesystem::exists(dir_)) {
        std::filesystem::create_directories(dir_);
        created_ = true;
    }
    require(std::filesystem::is_directory(dir_), ErrorCode::io,
            fmt::format("'{}' is not a directory", dir_.string()));
}

OutputDir::~OutputDir() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& f : files_) {
        std::filesystem::remove(f, ec);
        auto partial = f;
        partial += ".partial";
        std::filesystem::remove(partial, ec);
    }
    if (created_) std::filesystem::remove_all(dir_, ec);
}

std::filesystem::path OutputDir::file(const std::string& name) {
    auto p = dir_ / name;
    add(p);
    return p;
}

void OutputDir::add(const std::filesystem::path& written) {
    for (const auto& f : files_)
        if (f == written) return;
    files_.push_back(written);
}

void write_manifest(const RunRecord& run, const FlatConfig& config, OutputDir& out) {
    nlohmann::ordered_json j;
    j["command"] = run.command;
    j["tool_version"] = SAEAUDIT_VERSION;
    nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
    for (const auto& [k, v] : config.effective()) cfg[k] = v;
    j["config"] = cfg;
    j["config_digest"] = sha256_hex(cfg.dump());
    nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
    for (const auto& [k, v] : run.seeds) seeds[k] = v;
    j["seeds"] = seeds;
    nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
    for (const auto& p : run.inputs) {
        nlohmann::ordered_json in;
        in["path"] = p.string();
        in["sha256"] = sha256_file(p);
        const auto upstream = p.parent_path() / "manifest.json";
        in["manifest_sha256"] = std::filesystem::exists(upstream) ? nlohmann::ordered_json(sha256_file(upstream))
                                                                 : nlohmann::ordered_json(nullptr);
        inputs.push_back(in);
    }
    j["inputs"] = inputs;
    nlohmann::ordered_json outputs = nlohmann::ordered_json::array();
    for (const auto& p : out.files()) {
        nlohmann::ordered_json o;
        o["file"] = p.filename().string();
        o["sha256"] = sha256_file(p);
        outputs.push_back(o);
    }
    j["outputs"] = outputs;
    j["flags"] = run.flags;
    const auto ts = timestamp();
    j["started_at"] = ts;
    j["finished_at"] = ts;
    write_text_file(out.file("manifest.json"), j.dump(2) + "\n");
}

}  // namespace saeaudit::cli
