// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace saeaudit {

enum class ErrorCode {
    invalid_argument,
    dimension_mismatch,
    out_of_range,
    non_finite,
    io,
    format,
    degenerate,
    judge_failure,
};

std::string_view to_string(ErrorCode code);

// Every failure in the library surfaces as this type. The code lets callers
// (and the CLI exit path) branch without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) fail(code, message);
}

}  // namespace saeaudit
