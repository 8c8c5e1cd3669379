// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "saeaudit/matrix.hpp"
#include "saeaudit/vocab.hpp"

namespace saeaudit {

// Token-level latent activations for one document (n_tokens x width).
struct DocumentActivations {
    std::uint64_t doc_id = 0;
    TokenSequence tokens;
    Matrix latents;
};

struct ActivationRecord {
    std::uint64_t doc_id = 0;
    std::size_t token_index = 0;
    double activation = 0.0;
    TokenSequence context;  // window around token_index, truncated at document edges
    std::size_t context_start = 0;
};

inline constexpr std::size_t kDefaultContextRadius = 8;

// The k strongest positive activations of `latent_id`, sorted by activation
// descending then (doc_id, token_index) ascending. Fewer than k come back when
// the latent has fewer positive activations.
std::vector<ActivationRecord> top_activating(std::span<const DocumentActivations> corpus, std::size_t latent_id,
                                             std::size_t k, std::size_t radius = kDefaultContextRadius);

struct DetectionEvalSet {
    std::size_t latent_id = 0;
    // Sampled positives per tercile of the positive-activation distribution,
    // lowest tercile first.
    std::array<std::vector<ActivationRecord>, 3> terciles;
    std::array<std::size_t, 3> tercile_population{};
    std::vector<ActivationRecord> negatives;

    std::size_t positive_count() const;
};

// Splits the latent's positive activations into value terciles, samples
// `per_tercile` from each (with replacement when a tercile is smaller), and
// draws the same number of negatives uniformly from zero-activation positions.
DetectionEvalSet build_eval_set(std::span<const DocumentActivations> corpus, std::size_t latent_id,
                                std::size_t per_tercile, std::uint64_t seed,
                                std::size_t radius = kDefaultContextRadius);

enum class DescriptionSource { catalog, generated };

struct LatentDescription {
    std::size_t latent_id = 0;
    std::string text;
    DescriptionSource source = DescriptionSource::catalog;
    std::optional<double> detection_score;
};

enum class Verdict { activating, non_activating };

// Judges see only the description and one context window. Implementations
// must be pure functions of those inputs.
class Judge {
public:
    virtual ~Judge() = default;
    virtual Verdict judge(const LatentDescription& description, std::span<const TokenId> context) const = 0;
    virtual std::string name() const = 0;
};

// Says "activating" iff the context contains any keyword.
class KeywordJudge final : public Judge {
public:
    explicit KeywordJudge(std::vector<TokenId> keywords);
    Verdict judge(const LatentDescription& description, std::span<const TokenId> context) const override;
    std::string name() const override { return "keyword"; }

private:
    std::vector<TokenId> keywords_;
};

// A coin flip keyed on (seed, latent, context): uninformative but pure.
class RandomJudge final : public Judge {
public:
    explicit RandomJudge(std::uint64_t seed) : seed_(seed) {}
    Verdict judge(const LatentDescription& description, std::span<const TokenId> context) const override;
    std::string name() const override { return "random"; }

private:
    std::uint64_t seed_;
};

KeywordJudge keyword_judge(std::vector<TokenId> keywords);

// Detection score: balanced accuracy of the judge over the shuffled eval set.
double score_description(const LatentDescription& description, const DetectionEvalSet& eval_set, const Judge& judge,
                         std::uint64_t shuffle_seed = 0);

// Line-delimited description catalog: {"latent_id", "text", "source", "score"}.
void save_catalog(std::span<const LatentDescription> descriptions, const std::filesystem::path& path);
std::vector<LatentDescription> load_catalog(const std::filesystem::path& path);

void write_activation_records_csv(std::span<const ActivationRecord> records, const Vocabulary& vocab,
                                  const std::filesystem::path& path);

}  // namespace saeaudit
