// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace saeaudit {

using TokenId = std::uint32_t;
using TokenSequence = std::vector<TokenId>;

// Whitespace vocabulary: one word per id, no subword splitting.
class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> words);

    // Appends `word` if absent; returns its id either way.
    TokenId add(const std::string& word);

    std::size_t size() const noexcept { return words_.size(); }
    const std::vector<std::string>& words() const noexcept { return words_; }
    const std::string& word(TokenId id) const;
    std::optional<TokenId> find(std::string_view word) const;
    TokenId id(std::string_view word) const;

    // Splits on whitespace. Unknown words map to `unknown` when given,
    // otherwise they are an error.
    TokenSequence encode(std::string_view text, std::optional<TokenId> unknown = std::nullopt) const;
    std::string decode(const TokenSequence& tokens) const;

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.words_ == b.words_; }

private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, TokenId> index_;
};

}  // namespace saeaudit
