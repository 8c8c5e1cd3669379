// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "saeaudit/corpus.hpp"
#include "saeaudit/error.hpp"
#include "saeaudit/io.hpp"

using namespace saeaudit;

namespace {

bool member(const std::vector<TokenId>& ids, TokenId t) { return std::find(ids.begin(), ids.end(), t) != ids.end(); }

CorpusSpec spec_with(std::size_t n, double rho, std::uint64_t seed) {
    CorpusSpec s;
    s.n_docs = n;
    s.correlation = rho;
    s.seed = seed;
    return s;
}

// Hand-computed phi from raw counts, kept apart from the library routine.
double phi_by_counts(const std::vector<NoteRecord>& notes) {
    double a = 0, b = 0, c = 0, d = 0;
    for (const auto& n : notes) {
        if (n.group == Group::a && n.condition) ++a;
        if (n.group == Group::a && !n.condition) ++b;
        if (n.group == Group::b && n.condition) ++c;
        if (n.group == Group::b && !n.condition) ++d;
    }
    return (a * d - b * c) / std::sqrt((a + b) * (c + d) * (a + c) * (b + d));
}

void expect_format_error(const std::filesystem::path& p, const std::string& needle) {
    try {
        load_corpus(p);
        FAIL("expected a format error for " << needle);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::format);
        CHECK_MESSAGE(std::string(e.what()).find(needle) != std::string::npos, e.what());
    }
}

}  // namespace

TEST_CASE("layout ids and validation") {
    const std::vector<std::string> extra{"or", "Yes"};
    const auto l = make_layout(3, 2, 1, extra);
    CHECK(l.vocab.word(l.yes) == "Yes");
    CHECK(l.vocab.word(l.no) == "No");
    CHECK(l.vocab.word(l.fillers[2]) == "w0002");
    CHECK(l.vocab.word(l.markers_a[1]) == "ga0001");
    CHECK(l.vocab.word(l.markers_b[0]) == "gb0000");
    CHECK(l.vocab.word(l.conditions[0]) == "c0000");
    CHECK(l.vocab.size() == 3 + 3 + 4 + 1 + 1);
    CHECK(l.markers(Group::a) == l.markers_a);

    auto bad = l;
    bad.markers_b.push_back(l.markers_a[0]);
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = l;
    bad.conditions.clear();
    CHECK_THROWS_AS(bad.validate(), Error);
    CHECK_THROWS_AS(make_layout(0, 1, 1), Error);
}

TEST_CASE("group names") {
    CHECK(to_string(Group::a) == "A");
    CHECK(parse_group("B") == Group::b);
    CHECK_THROWS_AS(parse_group("a"), Error);
}

TEST_CASE("spec validation") {
    CorpusSpec s;
    CHECK_NOTHROW(s.validate());
    s.min_length = 2;
    CHECK_THROWS_AS(s.validate(), Error);
    s = {};
    s.max_length = 4;
    CHECK_THROWS_AS(s.validate(), Error);
    s = {};
    s.marker_rate = 1.5;
    CHECK_THROWS_AS(s.validate(), Error);
    s = {};
    s.condition_rate = 0.1;
    s.correlation = 0.9;
    CHECK_THROWS_AS(s.validate(), Error);
    s.correlation = 0.3;
    CHECK_NOTHROW(s.validate());
}

TEST_CASE("notes carry the tokens their labels claim") {
    const auto layout = make_layout(20, 5, 3);
    auto spec = spec_with(500, 0.4, 1);
    spec.marker_rate = 0.6;
    const auto notes = generate_corpus(spec, layout);
    REQUIRE(notes.size() == 500);
    std::size_t n_a = 0;
    for (std::size_t i = 0; i < notes.size(); ++i) {
        const auto& n = notes[i];
        CHECK(n.doc_id == i);
        CHECK(n.tokens.size() >= spec.min_length);
        CHECK(n.tokens.size() <= spec.max_length);
        n_a += n.group == Group::a;
        std::size_t markers = 0, own = 0, conds = 0;
        for (std::size_t t = 0; t < n.tokens.size(); ++t) {
            const TokenId tok = n.tokens[t];
            const bool is_a = member(layout.markers_a, tok), is_b = member(layout.markers_b, tok);
            markers += is_a || is_b;
            own += member(layout.markers(n.group), tok);
            if (member(layout.conditions, tok)) {
                ++conds;
                CHECK(t >= n.tokens.size() / 2);
            }
        }
        CHECK(markers == own);
        CHECK(markers == (n.marker_position ? 1u : 0u));
        if (n.marker_position) CHECK(*n.marker_position < n.tokens.size() / 2);
        CHECK(conds == (n.condition ? 1u : 0u));
    }
    CHECK(n_a == 250);
}

TEST_CASE("independent groups and conditions give phi near zero") {
    const auto layout = make_layout(20, 5, 3);
    const auto notes = generate_corpus(spec_with(2000, 0.0, 2), layout);
    CHECK(std::abs(phi_coefficient(notes)) < 0.05);
}

TEST_CASE("the realized phi tracks the target") {
    const auto layout = make_layout(20, 5, 3);
    for (double rho : {-0.6, -0.2, 0.3, 0.5, 0.9}) {
        const auto notes = generate_corpus(spec_with(5000, rho, 3), layout);
        const double phi = phi_coefficient(notes);
        CHECK(phi == doctest::Approx(phi_by_counts(notes)).epsilon(1e-12));
        CHECK(std::abs(phi - rho) < 0.03);
    }
    const auto perfect = generate_corpus(spec_with(1000, 1.0, 4), layout);
    CHECK(phi_coefficient(perfect) == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& n : perfect) CHECK(n.condition == (n.group == Group::a));
}

TEST_CASE("the observed marker rate matches the configured rate") {
    const auto layout = make_layout(20, 5, 3);
    auto spec = spec_with(4000, 0.0, 5);
    spec.marker_rate = 0.043;
    const auto notes = generate_corpus(spec, layout);
    double with = 0.0;
    for (const auto& n : notes) with += n.marker_position.has_value();
    CHECK(std::abs(with / 4000.0 - 0.043) < 0.02);
    spec.marker_rate = 0.0;
    for (const auto& n : generate_corpus(spec, layout)) CHECK(!n.marker_position);
}

TEST_CASE("generation is a pure function of the seed") {
    const auto layout = make_layout(20, 5, 3);
    const auto a = generate_corpus(spec_with(300, 0.2, 6), layout);
    CHECK(a == generate_corpus(spec_with(300, 0.2, 6), layout));
    CHECK(a != generate_corpus(spec_with(300, 0.2, 7), layout));
}

TEST_CASE("counterfactual pairs differ in exactly one token") {
    const auto layout = make_layout(20, 5, 3);
    auto spec = spec_with(200, 0.0, 8);
    spec.marker_rate = 1.0;
    Rng rng(9);
    for (const auto& note : generate_corpus(spec, layout)) {
        const auto ma = layout.markers_a[rng.below(5)], mb = layout.markers_b[rng.below(5)];
        const auto [a, b] = counterfactual_pair(note, *note.marker_position, ma, mb, layout);
        std::size_t hamming = 0;
        for (std::size_t t = 0; t < a.tokens.size(); ++t) hamming += a.tokens[t] != b.tokens[t];
        CHECK(hamming == 1);
        CHECK(a.group == Group::a);
        CHECK(b.group == Group::b);
        CHECK(a.tokens[*note.marker_position] == ma);
        const auto [a2, a3] = counterfactual_pair(a, *note.marker_position, ma, mb, layout);
        CHECK(a2.tokens == a.tokens);
        CHECK(a3.tokens == b.tokens);
    }
    const auto note = generate_corpus(spec, layout).front();
    CHECK_THROWS_AS(counterfactual_pair(note, 99, layout.markers_a[0], layout.markers_b[0], layout), Error);
    CHECK_THROWS_AS(counterfactual_pair(note, 0, layout.markers_b[0], layout.markers_b[0], layout), Error);
    CHECK_THROWS_AS(counterfactual_pair(note, 0, layout.markers_a[0], layout.fillers[0], layout), Error);
}

TEST_CASE("splits are stratified, sorted and disjoint") {
    const auto layout = make_layout(20, 5, 3);
    const auto notes = generate_corpus(spec_with(10, 0.0, 10), layout);
    const auto [train, test] = split(notes, SplitSpec{0.8, 1});
    CHECK(train.size() == 8);
    CHECK(test.size() == 2);
    const auto count_a = [](const std::vector<NoteRecord>& v) {
        return std::count_if(v.begin(), v.end(), [](const NoteRecord& n) { return n.group == Group::a; });
    };
    CHECK(count_a(train) == 4);
    CHECK(count_a(test) == 1);
    CHECK(std::is_sorted(train.begin(), train.end(),
                         [](const NoteRecord& x, const NoteRecord& y) { return x.doc_id < y.doc_id; }));
    for (const auto& t : test)
        CHECK(std::none_of(train.begin(), train.end(), [&](const NoteRecord& x) { return x.doc_id == t.doc_id; }));

    const auto big = generate_corpus(spec_with(1001, 0.0, 11), layout);
    const auto [tr, te] = split(big, SplitSpec{0.8, 2});
    CHECK(tr.size() + te.size() == 1001);
    CHECK(static_cast<double>(count_a(tr)) / static_cast<double>(tr.size()) ==
          doctest::Approx(501.0 / 1001.0).epsilon(0.01));

    CHECK_THROWS_AS(split(notes, SplitSpec{1.0, 1}), Error);
    CHECK_THROWS_AS(split(notes, SplitSpec{0.01, 1}), Error);
    CHECK_THROWS_AS(split(std::vector<NoteRecord>(1), SplitSpec{}), Error);
}

TEST_CASE("phi needs both margins") {
    std::vector<NoteRecord> notes(4);
    for (auto& n : notes) n.group = Group::a;
    CHECK_THROWS_AS(phi_coefficient(notes), Error);
}

TEST_CASE("corpus files round-trip") {
    test::TempDir dir("corpus");
    const std::vector<std::string> extra{"or"};
    Corpus c{make_layout(8, 3, 2, extra), spec_with(50, 0.3, 12), {}};
    c.records = generate_corpus(c.spec, c.layout);
    save_corpus(c, dir / "c.jsonl");
    const auto back = load_corpus(dir / "c.jsonl");
    CHECK(back.records == c.records);
    CHECK(back.layout.vocab == c.layout.vocab);
    CHECK(back.layout.markers_a == c.layout.markers_a);
    CHECK(back.spec.correlation == c.spec.correlation);
    CHECK(back.spec.seed == c.spec.seed);
    save_corpus(back, dir / "d.jsonl");
    CHECK(read_text_file(dir / "c.jsonl") == read_text_file(dir / "d.jsonl"));
}

TEST_CASE("malformed corpus files are rejected with the line number") {
    test::TempDir dir("corpus-bad");
    Corpus c{make_layout(8, 3, 2), spec_with(5, 0.0, 13), {}};
    c.spec.marker_rate = 1.0;
    c.records = generate_corpus(c.spec, c.layout);
    save_corpus(c, dir / "good.jsonl");
    const auto text = read_text_file(dir / "good.jsonl");
    const auto header = text.substr(0, text.find('\n') + 1);

    write_text_file(dir / "missing.jsonl", header + "{\"doc_id\": 1, \"tokens\": [3, 4, 5], \"group\": \"A\"}\n");
    expect_format_error(dir / "missing.jsonl", "line 2: missing field 'condition'");

    const auto first_note = text.substr(header.size(), text.find('\n', header.size()) + 1 - header.size());
    write_text_file(dir / "dup.jsonl", header + first_note + first_note);
    expect_format_error(dir / "dup.jsonl", "line 3: duplicate doc_id");

    write_text_file(dir / "junk.jsonl", header + "{not json\n");
    expect_format_error(dir / "junk.jsonl", "line 2");

    write_text_file(dir / "oob.jsonl",
                    header + "{\"doc_id\": 1, \"tokens\": [999], \"group\": \"A\", \"condition\": false, "
                             "\"marker_position\": null}\n");
    expect_format_error(dir / "oob.jsonl", "outside vocabulary");

    write_text_file(dir / "marker.jsonl",
                    header + "{\"doc_id\": 1, \"tokens\": [3, 4, 5], \"group\": \"A\", \"condition\": false, "
                             "\"marker_position\": 0}\n");
    expect_format_error(dir / "marker.jsonl", "marker_position");

    write_text_file(dir / "other.jsonl", "{\"format\": \"something-else\", \"version\": 1}\n");
    expect_format_error(dir / "other.jsonl", "not a saeaudit corpus");
    write_text_file(dir / "empty.jsonl", "");
    expect_format_error(dir / "empty.jsonl", "empty");
    CHECK_THROWS_AS(load_corpus(dir / "absent.jsonl"), Error);
}
