// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "saeaudit/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>
#include <json.hpp>

#include "saeaudit/error.hpp"
#include "saeaudit/io.hpp"
#include "saeaudit/rng.hpp"

namespace saeaudit {
namespace {

using ordered_json = nlohmann::ordered_json;

constexpr const char* kCorpusFormat = "saeaudit-corpus";
constexpr int kCorpusVersion = 1;

bool contains(const std::vector<TokenId>& ids, TokenId id) { return std::find(ids.begin(), ids.end(), id) != ids.end(); }

TokenId pick(Rng& rng, const std::vector<TokenId>& ids) { return ids[static_cast<std::size_t>(rng.below(ids.size()))]; }

const nlohmann::json& field(const nlohmann::json& j, const char* name, std::size_t line) {
    if (!j.is_object() || !j.contains(name))
        fail(ErrorCode::format, fmt::format("line {}: missing field '{}'", line, name));
    return j.at(name);
}

ordered_json spec_to_json(const CorpusSpec& s) {
    ordered_json j;
    j["n_docs"] = s.n_docs;
    j["min_length"] = s.min_length;
    j["max_length"] = s.max_length;
    j["marker_rate"] = s.marker_rate;
    j["correlation"] = s.correlation;
    j["condition_rate"] = s.condition_rate;
    j["seed"] = s.seed;
    return j;
}

CorpusSpec spec_from_json(const nlohmann::json& j, std::size_t line) {
    CorpusSpec s;
    s.n_docs = field(j, "n_docs", line).get<std::size_t>();
    s.min_length = field(j, "min_length", line).get<std::size_t>();
    s.max_length = field(j, "max_length", line).get<std::size_t>();
    s.marker_rate = field(j, "marker_rate", line).get<double>();
    s.correlation = field(j, "correlation", line).get<double>();
    s.condition_rate = field(j, "condition_rate", line).get<double>();
    s.seed = field(j, "seed", line).get<std::uint64_t>();
    return s;
}

}  // namespace

std::string_view to_string(Group g) { return g == Group::a ? "A" : "B"; }

Group parse_group(std::string_view text) {
    if (text == "A") return Group::a;
    if (text == "B") return Group::b;
    fail(ErrorCode::format, fmt::format("unknown group '{}'", text));
}

void VocabLayout::validate() const {
    require(!fillers.empty(), ErrorCode::invalid_argument, "layout needs at least one filler token");
    require(!markers_a.empty() && !markers_b.empty(), ErrorCode::invalid_argument,
            "layout needs at least one marker token per group");
    require(!conditions.empty(), ErrorCode::invalid_argument, "layout needs at least one condition token");
    std::set<TokenId> seen{yes, no};
    require(seen.size() == 2, ErrorCode::invalid_argument, "answer tokens must differ");
    for (const auto* cls : {&fillers, &markers_a, &markers_b, &conditions})
        for (TokenId id : *cls) {
            require(id < vocab.size(), ErrorCode::out_of_range,
                    fmt::format("token id {} outside vocabulary of size {}", id, vocab.size()));
            require(seen.insert(id).second, ErrorCode::invalid_argument,
                    fmt::format("token '{}' belongs to more than one token class", vocab.word(id)));
        }
}

VocabLayout make_layout(std::size_t n_fillers, std::size_t n_markers_per_group, std::size_t n_conditions,
                        std::span<const std::string> extra_words) {
    VocabLayout layout;
    layout.vocab.add("<unk>");
    layout.yes = layout.vocab.add("Yes");
    layout.no = layout.vocab.add("No");
    for (std::size_t i = 0; i < n_fillers; ++i) layout.fillers.push_back(layout.vocab.add(fmt::format("w{:04}", i)));
    for (std::size_t i = 0; i < n_markers_per_group; ++i)
        layout.markers_a.push_back(layout.vocab.add(fmt::format("ga{:04}", i)));
    for (std::size_t i = 0; i < n_markers_per_group; ++i)
        layout.markers_b.push_back(layout.vocab.add(fmt::format("gb{:04}", i)));
    for (std::size_t i = 0; i < n_conditions; ++i)
        layout.conditions.push_back(layout.vocab.add(fmt::format("c{:04}", i)));
    for (const auto& w : extra_words) layout.vocab.add(w);
    layout.validate();
    return layout;
}

void CorpusSpec::validate() const {
    require(n_docs >= 1, ErrorCode::invalid_argument, "corpus needs at least one document");
    require(min_length >= 3, ErrorCode::invalid_argument, fmt::format("doc length {} < 3", min_length));
    require(max_length >= min_length, ErrorCode::invalid_argument, "max_length must be >= min_length");
    require(marker_rate >= 0.0 && marker_rate <= 1.0, ErrorCode::invalid_argument, "marker_rate must lie in [0, 1]");
    require(condition_rate > 0.0 && condition_rate < 1.0, ErrorCode::invalid_argument,
            "condition_rate must lie in (0, 1)");
    require(correlation >= -1.0 && correlation <= 1.0, ErrorCode::invalid_argument,
            "correlation must lie in [-1, 1]");
    const double shift = std::abs(correlation) * std::sqrt(condition_rate * (1.0 - condition_rate));
    for (const double p : {condition_rate + shift, condition_rate - shift}) {
        require(p >= -1e-12 && p <= 1.0 + 1e-12, ErrorCode::invalid_argument,
                fmt::format("correlation {} is unreachable with condition_rate {}", correlation, condition_rate));
    }
}

double condition_probability(const CorpusSpec& spec, Group g) {
    // With P(A) = P(B) = 1/2: P(C|A) = q + rho sqrt(q(1-q)), P(C|B) = q - rho sqrt(q(1-q)).
    const double q = spec.condition_rate;
    const double shift = spec.correlation * std::sqrt(q * (1.0 - q));
    return std::clamp(g == Group::a ? q + shift : q - shift, 0.0, 1.0);
}

std::vector<NoteRecord> generate_corpus(const CorpusSpec& spec, const VocabLayout& layout) {
    spec.validate();
    layout.validate();
    Rng rng(spec.seed);

    const std::size_t n_a = spec.n_docs - spec.n_docs / 2;
    std::vector<Group> groups(spec.n_docs, Group::b);
    std::fill_n(groups.begin(), n_a, Group::a);
    rng.shuffle(std::span(groups));

    std::vector<bool> condition(spec.n_docs, false);
    for (Group g : {Group::a, Group::b}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < spec.n_docs; ++i)
            if (groups[i] == g) members.push_back(i);
        const auto target = static_cast<std::size_t>(
            std::llround(condition_probability(spec, g) * static_cast<double>(members.size())));
        rng.shuffle(std::span(members));
        for (std::size_t k = 0; k < std::min(target, members.size()); ++k) condition[members[k]] = true;
    }

    std::vector<NoteRecord> records(spec.n_docs);
    for (std::size_t i = 0; i < spec.n_docs; ++i) {
        NoteRecord& note = records[i];
        note.doc_id = i;
        note.group = groups[i];
        note.condition = condition[i];
        const auto length =
            spec.min_length + static_cast<std::size_t>(rng.below(spec.max_length - spec.min_length + 1));
        note.tokens.resize(length);
        for (auto& t : note.tokens) t = pick(rng, layout.fillers);
        const std::size_t half = length / 2;
        if (rng.bernoulli(spec.marker_rate)) {
            const auto pos = static_cast<std::size_t>(rng.below(half));
            note.tokens[pos] = pick(rng, layout.markers(note.group));
            note.marker_position = pos;
        }
        if (note.condition) {
            const auto pos = half + static_cast<std::size_t>(rng.below(length - half));
            note.tokens[pos] = pick(rng, layout.conditions);
        }
    }
    return records;
}

std::pair<NoteRecord, NoteRecord> counterfactual_pair(const NoteRecord& note, std::size_t position, TokenId marker_a,
                                                      TokenId marker_b, const VocabLayout& layout) {
    require(position < note.tokens.size(), ErrorCode::out_of_range,
            fmt::format("marker position {} outside note of length {}", position, note.tokens.size()));
    require(contains(layout.markers_a, marker_a), ErrorCode::invalid_argument,
            fmt::format("token {} is not a group-A marker", marker_a));
    require(contains(layout.markers_b, marker_b), ErrorCode::invalid_argument,
            fmt::format("token {} is not a group-B marker", marker_b));
    NoteRecord a = note;
    NoteRecord b = note;
    a.tokens[position] = marker_a;
    b.tokens[position] = marker_b;
    a.group = Group::a;
    b.group = Group::b;
    a.marker_position = b.marker_position = position;
    return {std::move(a), std::move(b)};
}

std::pair<std::vector<NoteRecord>, std::vector<NoteRecord>> split(std::span<const NoteRecord> records,
                                                                  const SplitSpec& spec) {
    require(records.size() >= 2, ErrorCode::invalid_argument, "split needs at least two records");
    require(spec.train_fraction > 0.0 && spec.train_fraction < 1.0, ErrorCode::invalid_argument,
            "train_fraction must lie in (0, 1)");
    Rng rng(spec.seed);
    std::vector<NoteRecord> train, test;
    for (Group g : {Group::a, Group::b}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < records.size(); ++i)
            if (records[i].group == g) members.push_back(i);
        rng.shuffle(std::span(members));
        const auto n_train =
            static_cast<std::size_t>(std::llround(spec.train_fraction * static_cast<double>(members.size())));
        for (std::size_t k = 0; k < members.size(); ++k) (k < n_train ? train : test).push_back(records[members[k]]);
    }
    require(!train.empty() && !test.empty(), ErrorCode::invalid_argument,
            fmt::format("train_fraction {} leaves an empty split of {} records", spec.train_fraction, records.size()));
    const auto by_id = [](const NoteRecord& x, const NoteRecord& y) { return x.doc_id < y.doc_id; };
    std::sort(train.begin(), train.end(), by_id);
    std::sort(test.begin(), test.end(), by_id);
    return {std::move(train), std::move(test)};
}

double phi_coefficient(std::span<const NoteRecord> records) {
    double n11 = 0, n10 = 0, n01 = 0, n00 = 0;
    for (const auto& r : records) {
        const bool a = r.group == Group::a;
        (a ? (r.condition ? n11 : n10) : (r.condition ? n01 : n00)) += 1.0;
    }
    const double denom = std::sqrt((n11 + n10) * (n01 + n00) * (n11 + n01) * (n10 + n00));
    require(denom > 0.0, ErrorCode::degenerate, "phi is undefined when a margin is empty");
    return (n11 * n00 - n10 * n01) / denom;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    std::string text;
    ordered_json header;
    header["format"] = kCorpusFormat;
    header["version"] = kCorpusVersion;
    header["spec"] = spec_to_json(corpus.spec);
    ordered_json layout;
    layout["yes"] = corpus.layout.yes;
    layout["no"] = corpus.layout.no;
    layout["fillers"] = corpus.layout.fillers;
    layout["markers_a"] = corpus.layout.markers_a;
    layout["markers_b"] = corpus.layout.markers_b;
    layout["conditions"] = corpus.layout.conditions;
    header["layout"] = layout;
    header["vocab"] = corpus.layout.vocab.words();
    text += header.dump() + '\n';
    for (const auto& r : corpus.records) {
        ordered_json j;
        j["doc_id"] = r.doc_id;
        j["tokens"] = r.tokens;
        j["group"] = to_string(r.group);
        j["condition"] = r.condition;
        j["marker_position"] = r.marker_position ? ordered_json(*r.marker_position) : ordered_json(nullptr);
        text += j.dump() + '\n';
    }
    write_text_file(path, text);
}

Corpus load_corpus(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::size_t line_no = 0;
    Corpus corpus;
    std::unordered_set<std::uint64_t> ids;
    try {
        require(static_cast<bool>(std::getline(in, line)), ErrorCode::format, "empty corpus file");
        line_no = 1;
        const auto header = nlohmann::json::parse(line);
        require(field(header, "format", 1).get<std::string>() == kCorpusFormat, ErrorCode::format,
                "line 1: not a saeaudit corpus");
        const int version = field(header, "version", 1).get<int>();
        require(version == kCorpusVersion, ErrorCode::format,
                fmt::format("line 1: unsupported corpus version {}", version));
        corpus.spec = spec_from_json(field(header, "spec", 1), 1);
        corpus.layout.vocab = Vocabulary(field(header, "vocab", 1).get<std::vector<std::string>>());
        const auto& layout = field(header, "layout", 1);
        corpus.layout.yes = field(layout, "yes", 1).get<TokenId>();
        corpus.layout.no = field(layout, "no", 1).get<TokenId>();
        corpus.layout.fillers = field(layout, "fillers", 1).get<std::vector<TokenId>>();
        corpus.layout.markers_a = field(layout, "markers_a", 1).get<std::vector<TokenId>>();
        corpus.layout.markers_b = field(layout, "markers_b", 1).get<std::vector<TokenId>>();
        corpus.layout.conditions = field(layout, "conditions", 1).get<std::vector<TokenId>>();
        corpus.layout.validate();

        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            const auto j = nlohmann::json::parse(line);
            NoteRecord r;
            r.doc_id = field(j, "doc_id", line_no).get<std::uint64_t>();
            r.tokens = field(j, "tokens", line_no).get<TokenSequence>();
            r.group = parse_group(field(j, "group", line_no).get<std::string>());
            r.condition = field(j, "condition", line_no).get<bool>();
            const auto& pos = field(j, "marker_position", line_no);
            if (!pos.is_null()) r.marker_position = pos.get<std::size_t>();
            for (TokenId t : r.tokens)
                require(t < corpus.layout.vocab.size(), ErrorCode::format,
                        fmt::format("line {}: token id {} outside vocabulary", line_no, t));
            if (r.marker_position)
                require(*r.marker_position < r.tokens.size() &&
                            contains(corpus.layout.markers(r.group), r.tokens[*r.marker_position]),
                        ErrorCode::format,
                        fmt::format("line {}: marker_position does not hold a group {} marker", line_no,
                                    to_string(r.group)));
            require(ids.insert(r.doc_id).second, ErrorCode::format,
                    fmt::format("line {}: duplicate doc_id {}", line_no, r.doc_id));
            corpus.records.push_back(std::move(r));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::format, fmt::format("{}: line {}: {}", path.string(), line_no, e.what()));
    } catch (const Error& e) {
        fail(e.code(), fmt::format("{}: {}", path.string(), e.what()));
    }
    return corpus;
}

}  // namespace saeaudit
