// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "saeaudit/interp.hpp"

#include <algorithm>
#include <fstream>

#include <fmt/format.h>
#include <json.hpp>

#include "saeaudit/error.hpp"
#include "saeaudit/rng.hpp"

namespace saeaudit {
namespace {

std::size_t corpus_width(std::span<const DocumentActivations> corpus) {
    require(!corpus.empty(), ErrorCode::invalid_argument, "corpus activations are empty");
    const std::size_t w = corpus.front().latents.cols();
    for (const auto& doc : corpus) {
        require(doc.latents.cols() == w, ErrorCode::dimension_mismatch, "documents disagree on latent width");
        require(doc.latents.rows() == doc.tokens.size(), ErrorCode::dimension_mismatch,
                fmt::format("document {} has {} latent rows for {} tokens", doc.doc_id, doc.latents.rows(),
                            doc.tokens.size()));
    }
    return w;
}

ActivationRecord make_record(const DocumentActivations& doc, std::size_t t, double activation, std::size_t radius) {
    ActivationRecord r;
    r.doc_id = doc.doc_id;
    r.token_index = t;
    r.activation = activation;
    r.context_start = t >= radius ? t - radius : 0;
    const std::size_t end = std::min(doc.tokens.size(), t + radius + 1);
    r.context.assign(doc.tokens.begin() + static_cast<std::ptrdiff_t>(r.context_start),
                     doc.tokens.begin() + static_cast<std::ptrdiff_t>(end));
    return r;
}

struct Position {
    std::size_t doc = 0;
    std::size_t token = 0;
    double activation = 0.0;
};

std::vector<ActivationRecord> sample(const std::vector<Position>& pool, std::size_t count, Rng& rng,
                                     std::span<const DocumentActivations> corpus, std::size_t radius) {
    std::vector<ActivationRecord> out;
    out.reserve(count);
    if (pool.size() >= count) {
        std::vector<std::size_t> idx(pool.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        for (std::size_t i = 0; i < count; ++i) {
            const auto j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
            std::swap(idx[i], idx[j]);
            const auto& p = pool[idx[i]];
            out.push_back(make_record(corpus[p.doc], p.token, p.activation, radius));
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            const auto& p = pool[static_cast<std::size_t>(rng.below(pool.size()))];
            out.push_back(make_record(corpus[p.doc], p.token, p.activation, radius));
        }
    }
    return out;
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return derive_seed(h ^ v, v); }

}  // namespace

std::vector<ActivationRecord> top_activating(std::span<const DocumentActivations> corpus, std::size_t latent_id,
                                             std::size_t k, std::size_t radius) {
    require(k >= 1, ErrorCode::invalid_argument, "top_activating needs k >= 1");
    const std::size_t width = corpus_width(corpus);
    require(latent_id < width, ErrorCode::out_of_range,
            fmt::format("latent {} outside SAE width {}", latent_id, width));
    std::vector<Position> hits;
    for (std::size_t d = 0; d < corpus.size(); ++d)
        for (std::size_t t = 0; t < corpus[d].tokens.size(); ++t) {
            const double a = corpus[d].latents(t, latent_id);
            if (a > 0.0) hits.push_back({d, t, a});
        }
    std::sort(hits.begin(), hits.end(), [&](const Position& a, const Position& b) {
        if (a.activation != b.activation) return a.activation > b.activation;
        if (corpus[a.doc].doc_id != corpus[b.doc].doc_id) return corpus[a.doc].doc_id < corpus[b.doc].doc_id;
        return a.token < b.token;
    });
    hits.resize(std::min(k, hits.size()));
    std::vector<ActivationRecord> out;
    for (const auto& h : hits) out.push_back(make_record(corpus[h.doc], h.token, h.activation, radius));
    return out;
}

std::size_t DetectionEvalSet::positive_count() const {
    return terciles[0].size() + terciles[1].size() + terciles[2].size();
}

DetectionEvalSet build_eval_set(std::span<const DocumentActivations> corpus, std::size_t latent_id,
                                std::size_t per_tercile, std::uint64_t seed, std::size_t radius) {
    require(per_tercile >= 1, ErrorCode::invalid_argument, "per_tercile must be >= 1");
    const std::size_t width = corpus_width(corpus);
    require(latent_id < width, ErrorCode::out_of_range,
            fmt::format("latent {} outside SAE width {}", latent_id, width));

    std::vector<Position> positives, zeros;
    for (std::size_t d = 0; d < corpus.size(); ++d)
        for (std::size_t t = 0; t < corpus[d].tokens.size(); ++t) {
            const double a = corpus[d].latents(t, latent_id);
            (a > 0.0 ? positives : zeros).push_back({d, t, a});
        }
    require(positives.size() >= 3, ErrorCode::invalid_argument,
            fmt::format("latent {} has {} positive activations; at least 3 are needed for terciles", latent_id,
                        positives.size()));
    require(!zeros.empty(), ErrorCode::invalid_argument,
            fmt::format("latent {} is active everywhere; no negatives to sample", latent_id));

    std::sort(positives.begin(), positives.end(), [&](const Position& a, const Position& b) {
        if (a.activation != b.activation) return a.activation < b.activation;
        if (corpus[a.doc].doc_id != corpus[b.doc].doc_id) return corpus[a.doc].doc_id < corpus[b.doc].doc_id;
        return a.token < b.token;
    });

    Rng rng(seed);
    DetectionEvalSet set;
    set.latent_id = latent_id;
    const std::size_t n = positives.size();
    for (std::size_t k = 0; k < 3; ++k) {
        const std::vector<Position> tercile(positives.begin() + static_cast<std::ptrdiff_t>(k * n / 3),
                                            positives.begin() + static_cast<std::ptrdiff_t>((k + 1) * n / 3));
        set.tercile_population[k] = tercile.size();
        set.terciles[k] = sample(tercile, per_tercile, rng, corpus, radius);
    }
    set.negatives = sample(zeros, set.positive_count(), rng, corpus, radius);
    return set;
}

KeywordJudge::KeywordJudge(std::vector<TokenId> keywords) : keywords_(std::move(keywords)) {
    require(!keywords_.empty(), ErrorCode::invalid_argument, "keyword judge needs at least one keyword");
    std::sort(keywords_.begin(), keywords_.end());
}

Verdict KeywordJudge::judge(const LatentDescription&, std::span<const TokenId> context) const {
    for (TokenId t : context)
        if (std::binary_search(keywords_.begin(), keywords_.end(), t)) return Verdict::activating;
    return Verdict::non_activating;
}

Verdict RandomJudge::judge(const LatentDescription& description, std::span<const TokenId> context) const {
    std::uint64_t h = mix(seed_, description.latent_id);
    for (TokenId t : context) h = mix(h, t);
    return (h >> 63) ? Verdict::activating : Verdict::non_activating;
}

KeywordJudge keyword_judge(std::vector<TokenId> keywords) { return KeywordJudge(std::move(keywords)); }

double score_description(const LatentDescription& description, const DetectionEvalSet& eval_set, const Judge& judge,
                         std::uint64_t shuffle_seed) {
    struct Example {
        const ActivationRecord* record;
        bool positive;
    };
    std::vector<Example> examples;
    for (const auto& tercile : eval_set.terciles)
        for (const auto& r : tercile) examples.push_back({&r, true});
    for (const auto& r : eval_set.negatives) examples.push_back({&r, false});
    const std::size_t n_pos = eval_set.positive_count(), n_neg = eval_set.negatives.size();
    require(n_pos > 0 && n_neg > 0, ErrorCode::invalid_argument, "eval set needs positives and negatives");

    Rng rng(shuffle_seed);
    rng.shuffle(std::span<Example>(examples));

    std::size_t true_pos = 0, true_neg = 0;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        Verdict v;
        try {
            v = judge.judge(description, examples[i].record->context);
        } catch (const std::exception& e) {
            fail(ErrorCode::judge_failure, fmt::format("judge '{}' failed on example {}: {}", judge.name(), i, e.what()));
        }
        if (examples[i].positive && v == Verdict::activating) ++true_pos;
        if (!examples[i].positive && v == Verdict::non_activating) ++true_neg;
    }
    return 0.5 * (static_cast<double>(true_pos) / static_cast<double>(n_pos) +
                  static_cast<double>(true_neg) / static_cast<double>(n_neg));
}

void save_catalog(std::span<const LatentDescription> descriptions, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), ErrorCode::io, fmt::format("cannot open '{}' for writing", path.string()));
    for (const auto& d : descriptions) {
        nlohmann::ordered_json j;
        j["latent_id"] = d.latent_id;
        j["text"] = d.text;
        j["source"] = d.source == DescriptionSource::catalog ? "catalog" : "generated";
        j["score"] = d.detection_score ? nlohmann::ordered_json(*d.detection_score) : nlohmann::ordered_json(nullptr);
        out << j.dump() << '\n';
    }
}

std::vector<LatentDescription> load_catalog(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorCode::io, fmt::format("cannot open '{}'", path.string()));
    std::vector<LatentDescription> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            LatentDescription d;
            d.latent_id = j.at("latent_id").get<std::size_t>();
            d.text = j.at("text").get<std::string>();
            const auto source = j.at("source").get<std::string>();
            require(source == "catalog" || source == "generated", ErrorCode::format,
                    fmt::format("unknown description source '{}'", source));
            d.source = source == "catalog" ? DescriptionSource::catalog : DescriptionSource::generated;
            if (!j.at("score").is_null()) d.detection_score = j.at("score").get<double>();
            out.push_back(std::move(d));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorCode::format, fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
        }
    }
    return out;
}

void write_activation_records_csv(std::span<const ActivationRecord> records, const Vocabulary& vocab,
                                  const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), ErrorCode::io, fmt::format("cannot open '{}' for writing", path.string()));
    out << "rank,doc_id,token_index,activation,token,context\n";
    for (std::size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        const auto marked = r.token_index - r.context_start;
        std::string context;
        for (std::size_t c = 0; c < r.context.size(); ++c) {
            if (c) context += ' ';
            context += c == marked ? "[[" + vocab.word(r.context[c]) + "]]" : vocab.word(r.context[c]);
        }
        out << fmt::format("{},{},{},{:.17g},{},\"{}\"\n", i + 1, r.doc_id, r.token_index, r.activation,
                           vocab.word(r.context[marked]), context);
    }
}

}  // namespace saeaudit
