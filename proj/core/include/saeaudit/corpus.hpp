// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "saeaudit/vocab.hpp"

namespace saeaudit {

enum class Group { a, b };

std::string_view to_string(Group g);
Group parse_group(std::string_view text);

// Token classes of a synthetic corpus. Must be pairwise disjoint.
struct VocabLayout {
    Vocabulary vocab;
    TokenId yes = 0;
    TokenId no = 0;
    std::vector<TokenId> fillers;
    std::vector<TokenId> markers_a;
    std::vector<TokenId> markers_b;
    std::vector<TokenId> conditions;

    const std::vector<TokenId>& markers(Group g) const { return g == Group::a ? markers_a : markers_b; }
    void validate() const;
};

// "<unk>", "Yes", "No", then fillers w0000.., markers ga0000.. / gb0000..,
// conditions c0000.., and finally `extra_words` (prompt text outside the
// note template) in that order.
VocabLayout make_layout(std::size_t n_fillers, std::size_t n_markers_per_group, std::size_t n_conditions,
                        std::span<const std::string> extra_words = {});

struct CorpusSpec {
    std::size_t n_docs = 1000;
    std::size_t min_length = 8;
    std::size_t max_length = 16;
    double marker_rate = 0.5;
    double correlation = 0.0;  // target phi between group A and condition presence
    double condition_rate = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

struct NoteRecord {
    std::uint64_t doc_id = 0;
    TokenSequence tokens;
    Group group = Group::a;
    bool condition = false;
    std::optional<std::size_t> marker_position;

    friend bool operator==(const NoteRecord&, const NoteRecord&) = default;
};

// P(condition | group) realizing `correlation` exactly with P(A) = 1/2 and
// P(condition) = condition_rate.
double condition_probability(const CorpusSpec& spec, Group g);

// Notes follow filler* marker? filler* condition? filler*: the marker (when
// present) sits in the first half and the condition token in the second.
// Group sizes differ by at most one; per-group condition counts are the
// rounded contingency targets, so the sample phi tracks `correlation`.
std::vector<NoteRecord> generate_corpus(const CorpusSpec& spec, const VocabLayout& layout);

// Two copies of `note` holding marker_a / marker_b at `position`.
std::pair<NoteRecord, NoteRecord> counterfactual_pair(const NoteRecord& note, std::size_t position, TokenId marker_a,
                                                      TokenId marker_b, const VocabLayout& layout);

struct SplitSpec {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
};

// Stratified by group; each side sorted by doc_id.
std::pair<std::vector<NoteRecord>, std::vector<NoteRecord>> split(std::span<const NoteRecord> records,
                                                                  const SplitSpec& spec);

double phi_coefficient(std::span<const NoteRecord> records);

struct Corpus {
    VocabLayout layout;
    CorpusSpec spec;
    std::vector<NoteRecord> records;
};

// One header line (format, version, spec, token classes, vocabulary) then one
// note per line.
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
Corpus load_corpus(const std::filesystem::path& path);

}  // namespace saeaudit
