// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "saeaudit/vocab.hpp"

#include <sstream>

#include <fmt/format.h>

#include "saeaudit/error.hpp"

namespace saeaudit {

Vocabulary::Vocabulary(std::vector<std::string> words) {
    for (auto& w : words) {
        require(!w.empty() && w.find_first_of(" \t\r\n") == std::string::npos, ErrorCode::invalid_argument,
                fmt::format("vocabulary word '{}' is empty or contains whitespace", w));
        require(!index_.contains(w), ErrorCode::invalid_argument, fmt::format("duplicate vocabulary word '{}'", w));
        index_.emplace(w, static_cast<TokenId>(words_.size()));
        words_.push_back(std::move(w));
    }
}

TokenId Vocabulary::add(const std::string& word) {
    if (auto found = find(word)) return *found;
    require(!word.empty() && word.find_first_of(" \t\r\n") == std::string::npos, ErrorCode::invalid_argument,
            fmt::format("vocabulary word '{}' is empty or contains whitespace", word));
    const auto id = static_cast<TokenId>(words_.size());
    index_.emplace(word, id);
    words_.push_back(word);
    return id;
}

const std::string& Vocabulary::word(TokenId id) const {
    require(id < words_.size(), ErrorCode::out_of_range,
            fmt::format("token id {} outside vocabulary of size {}", id, words_.size()));
    return words_[id];
}

std::optional<TokenId> Vocabulary::find(std::string_view word) const {
    auto it = index_.find(std::string(word));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

TokenId Vocabulary::id(std::string_view word) const {
    auto found = find(word);
    require(found.has_value(), ErrorCode::invalid_argument, fmt::format("word '{}' not in vocabulary", word));
    return *found;
}

TokenSequence Vocabulary::encode(std::string_view text, std::optional<TokenId> unknown) const {
    TokenSequence out;
    std::istringstream in{std::string(text)};
    std::string w;
    while (in >> w) {
        if (auto found = find(w)) {
            out.push_back(*found);
        } else {
            require(unknown.has_value(), ErrorCode::invalid_argument, fmt::format("word '{}' not in vocabulary", w));
            out.push_back(*unknown);
        }
    }
    return out;
}

std::string Vocabulary::decode(const TokenSequence& tokens) const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out += ' ';
        out += word(tokens[i]);
    }
    return out;
}

}  // namespace saeaudit
