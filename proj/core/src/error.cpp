// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "saeaudit/error.hpp"

namespace saeaudit {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::invalid_argument: return "invalid_argument";
        case ErrorCode::dimension_mismatch: return "dimension_mismatch";
        case ErrorCode::out_of_range: return "out_of_range";
        case ErrorCode::non_finite: return "non_finite";
        case ErrorCode::io: return "io";
        case ErrorCode::format: return "format";
        case ErrorCode::degenerate: return "degenerate";
        case ErrorCode::judge_failure: return "judge_failure";
    }
    return "unknown";
}

}  // namespace saeaudit
