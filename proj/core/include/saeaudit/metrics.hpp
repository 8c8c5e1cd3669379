// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "saeaudit/model.hpp"

namespace saeaudit {

// logit(yes) - logit(no) for one logit vector.
double logitdiff(std::span<const double> logits, TokenId yes, TokenId no);

// The answer metric interventions are scored with: the yes/no logit gap at
// the final position.
struct AnswerMetric {
    TokenId yes = 0;
    TokenId no = 0;

    double operator()(const LogitMatrix& logits) const { return logitdiff(final_logits(logits), yes, no); }
    std::string name() const { return "logitdiff"; }
};

// exp of the mean next-token negative log-likelihood of tokens
// [first_scored, n) under `scorer`. first_scored >= 1.
double perplexity(const Model& scorer, const TokenSequence& tokens, std::size_t first_scored = 1);

// Fraction of generations whose first token is in `positive_tokens`.
double positive_rate(std::span<const TokenSequence> generations, std::span<const TokenId> positive_tokens);

// Fraction of texts containing `pattern` (case-insensitive) anywhere.
double positive_rate(std::span<const std::string> texts, const std::string& pattern);

}  // namespace saeaudit
