// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "config.hpp"

#include <fmt/format.h>

#include "saeaudit/error.hpp"
#include "saeaudit/io.hpp"

namespace saeaudit::cli {

FlatConfig FlatConfig::load(const std::filesystem::path& path) {
    FlatConfig cfg;
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::format, fmt::format("config '{}': {}", path.string(), e.what()));
    }
    require(j.is_object(), ErrorCode::format, fmt::format("config '{}' must be a JSON object", path.string()));
    for (auto it = j.begin(); it != j.end(); ++it) {
        const auto& v = it.value();
        bool flat = !v.is_object();
        if (v.is_array())
            for (const auto& e : v) flat = flat && !e.is_object() && !e.is_array();
        require(flat, ErrorCode::format,
                fmt::format("config '{}': key '{}' must hold a scalar or an array of scalars", path.string(),
                            it.key()));
        cfg.values_[it.key()] = v;
    }
    cfg.base_dir_ = path.parent_path();
    return cfg;
}

void FlatConfig::set_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    require(eq != std::string::npos && eq > 0, ErrorCode::invalid_argument,
            fmt::format("override '{}' is not key=value", assignment));
    const auto key = assignment.substr(0, eq);
    const auto text = assignment.substr(eq + 1);
    auto parsed = nlohmann::json::parse(text, nullptr, false);
    set(key, parsed.is_discarded() ? nlohmann::json(text) : parsed);
}

void FlatConfig::set(const std::string& key, nlohmann::json value) { values_[key] = std::move(value); }

std::filesystem::path FlatConfig::path(const std::string& key) {
    const std::filesystem::path p = need<std::string>(key);
    return p.is_absolute() || base_dir_.empty() ? p : base_dir_ / p;
}

std::optional<std::filesystem::path> FlatConfig::optional_path(const std::string& key) {
    if (!has(key)) return std::nullopt;
    return path(key);
}

std::vector<std::string> FlatConfig::unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : values_)
        if (!effective_.contains(k)) out.push_back(k);
    return out;
}

void FlatConfig::missing(const std::string& key) {
    fail(ErrorCode::invalid_argument, fmt::format("missing required config key '{}'", key));
}

void FlatConfig::bad_type(const std::string& key) const {
    fail(ErrorCode::invalid_argument,
         fmt::format("config key '{}' has the wrong type (value {})", key, values_.at(key).dump()));
}

}  // namespace saeaudit::cli
