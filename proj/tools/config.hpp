// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

namespace saeaudit::cli {

// A flat key -> value configuration read from a JSON object. Values are
// scalars or arrays of scalars. Every key that is read (with its effective
// value, defaults included) is recorded for the run manifest.
class FlatConfig {
public:
    FlatConfig() = default;
    static FlatConfig load(const std::filesystem::path& path);

    // "key=value"; value is parsed as JSON when possible, else taken as a string.
    void set_override(const std::string& assignment);
    void set(const std::string& key, nlohmann::json value);

    bool has(const std::string& key) const { return values_.contains(key); }

    template <typename T>
    T get(const std::string& key, const T& fallback) {
        if (!values_.contains(key)) {
            effective_[key] = fallback;
            return fallback;
        }
        return read<T>(key);
    }

    template <typename T>
    T need(const std::string& key) {
        if (!values_.contains(key)) missing(key);
        return read<T>(key);
    }

    // Relative paths resolve against the config file's directory.
    std::filesystem::path path(const std::string& key);
    std::optional<std::filesystem::path> optional_path(const std::string& key);

    const std::map<std::string, nlohmann::json>& effective() const { return effective_; }
    std::vector<std::string> unused() const;

private:
    template <typename T>
    T read(const std::string& key) {
        try {
            T v = values_.at(key).get<T>();
            effective_[key] = values_.at(key);
            return v;
        } catch (const nlohmann::json::exception&) {
            bad_type(key);
        }
    }
    [[noreturn]] static void missing(const std::string& key);
    [[noreturn]] void bad_type(const std::string& key) const;

    std::map<std::string, nlohmann::json> values_;
    std::map<std::string, nlohmann::json> effective_;
    std::filesystem::path base_dir_;
};

}  // namespace saeaudit::cli
