// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "saeaudit/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <fmt/format.h>

#include "saeaudit/error.hpp"

namespace saeaudit {
namespace {

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

double logitdiff(std::span<const double> logits, TokenId yes, TokenId no) {
    require(yes < logits.size() && no < logits.size(), ErrorCode::out_of_range,
            fmt::format("answer ids ({}, {}) outside logit vector of size {}", yes, no, logits.size()));
    return logits[yes] - logits[no];
}

double perplexity(const Model& scorer, const TokenSequence& tokens, std::size_t first_scored) {
    require(tokens.size() >= 2, ErrorCode::invalid_argument, "perplexity needs at least two tokens");
    require(first_scored >= 1 && first_scored < tokens.size(), ErrorCode::invalid_argument,
            fmt::format("first scored position {} outside [1, {})", first_scored, tokens.size()));
    const LogitMatrix logits = scorer.forward(tokens);
    double nll = 0.0;
    for (std::size_t i = first_scored; i < tokens.size(); ++i) {
        const auto row = logits.row(i - 1);
        const double mx = *std::max_element(row.begin(), row.end());
        double total = 0.0;
        for (double v : row) total += std::exp(v - mx);
        nll += (mx + std::log(total)) - row[tokens[i]];
    }
    return std::exp(nll / static_cast<double>(tokens.size() - first_scored));
}

double positive_rate(std::span<const TokenSequence> generations, std::span<const TokenId> positive_tokens) {
    require(!generations.empty(), ErrorCode::invalid_argument, "positive rate needs at least one generation");
    std::size_t hits = 0;
    for (const auto& g : generations)
        if (!g.empty() && std::find(positive_tokens.begin(), positive_tokens.end(), g.front()) != positive_tokens.end())
            ++hits;
    return static_cast<double>(hits) / static_cast<double>(generations.size());
}

double positive_rate(std::span<const std::string> texts, const std::string& pattern) {
    require(!texts.empty(), ErrorCode::invalid_argument, "positive rate needs at least one generation");
    const std::string want = lowercase(pattern);
    std::size_t hits = 0;
    for (const auto& text : texts)
        if (lowercase(text).find(want) != std::string::npos) ++hits;
    return static_cast<double>(hits) / static_cast<double>(texts.size());
}

}  // namespace saeaudit
