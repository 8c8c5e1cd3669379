// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "saeaudit/corpus.hpp"
#include "saeaudit/intervene.hpp"
#include "saeaudit/model.hpp"
#include "saeaudit/sae.hpp"
#include "saeaudit/stats.hpp"

namespace saeaudit {

// A counterfactual pair of prompts: the group-A version and the group-B
// version differ only at the marker position.
struct PromptPair {
    std::uint64_t doc_id = 0;
    TokenSequence group_a;
    TokenSequence group_b;
};

// delta_i = logitdiff_A,i - logitdiff_B,i, tested against zero with a
// two-sided paired t-test.
struct PairedDelta {
    std::vector<double> logitdiff_a;
    std::vector<double> logitdiff_b;
    std::vector<double> delta;
    TTestResult test;

    double mean() const { return test.mean; }
};

PairedDelta paired_delta(std::vector<double> logitdiff_a, std::vector<double> logitdiff_b);

// Scores every pair at the final position, with `edits` applied to both
// versions (none for the clean arm).
PairedDelta delta_logitdiff(std::span<const PromptPair> pairs, const Model& model, const AnswerMetric& metric,
                            std::span<const ResidualEdit> edits = {}, std::size_t jobs = 1);

inline constexpr double kFlddEpsilon = 1e-9;

// 1 - ablated / clean. Throws degenerate when |clean| <= eps.
double fldd(double logitdiff_clean, double logitdiff_ablated, double eps = kFlddEpsilon);

struct FlddSummary {
    std::vector<std::optional<double>> per_input;  // nullopt where |clean| <= eps
    double mean = 0.0;                             // NaN when every input was excluded
    std::size_t included = 0;
    std::size_t excluded = 0;
};

FlddSummary fldd_summary(std::span<const double> clean, std::span<const double> ablated, double eps = kFlddEpsilon);

struct GenerationRates {
    std::vector<double> fractions;  // one per marker set
    std::size_t unclassified = 0;
    std::size_t n_samples = 0;
};

// Samples n_samples continuations of `prompt` (sample i uses seed
// derive_seed(sampler.seed, i)) and files each under the first marker set
// one of its generated tokens belongs to.
GenerationRates generation_rate_audit(const Model& model, const TokenSequence& prompt, const SamplerConfig& sampler,
                                      std::size_t n_samples, std::span<const std::vector<TokenId>> group_markers,
                                      std::span<const ResidualEdit> edits = {});

struct TermScan {
    double fraction = 0.0;
    std::vector<bool> flags;
};

// Case-insensitive substring scan for any of `terms`.
TermScan term_scan(std::span<const std::string> texts, std::span<const std::string> terms);

// Builds n_pairs counterfactual prompts from the corpus. Pair i edits note i
// (in corpus order, cycling) at its marker position, or at a seeded position
// in the first half when the note has none, and uses marker tokens
// markers_a[i % |A|] and markers_b[i % |B|]. `question` is appended to every
// prompt.
std::vector<PromptPair> build_prompt_pairs(const Corpus& corpus, std::size_t n_pairs, const TokenSequence& question,
                                           std::uint64_t seed);

std::vector<std::string> default_anti_bias_suffixes();

struct AuditTask {
    std::string name = "audit";
    std::string condition;
    std::string model_id;
    std::string sae_id;
    HookPoint hook;
    std::vector<std::size_t> ablate_latents;
    std::string question = "Yes or No";
    std::vector<std::string> anti_bias_suffixes = default_anti_bias_suffixes();
    std::size_t n_pairs = 40;
    std::size_t effect_pairs = 16;  // prompts used for the per-latent effect table
    std::size_t generation_samples = 0;
    std::size_t generation_tokens = 4;
    double generation_temperature = 1.0;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
};

struct AuditArm {
    std::string name;
    std::string description;
    PairedDelta delta;
    double positive_rate_a = 0.0;
    double positive_rate_b = 0.0;
};

struct AuditReport {
    AuditTask task;
    std::vector<PromptPair> pairs;
    std::vector<AuditArm> arms;  // "before", "anti_bias_<k>", "sae_ablation"
    FlddSummary fldd;
    EffectResult effects;
    std::optional<GenerationRates> generation_before;
    std::optional<GenerationRates> generation_after;
    std::uint64_t pair_seed = 0;
    std::uint64_t sampler_seed = 0;
    std::vector<std::string> flags;  // degeneracy flags, empty when clean

    const AuditArm& arm(std::string_view name) const;
};

// Runs every arm; a failing stage rethrows with the stage name prefixed.
AuditReport run_audit(const AuditTask& task, const Corpus& corpus, const Model& model, const SaeModel& sae);

// report.json, pairs.csv, effects.csv, fldd.csv and delta_chart.svg inside
// `dir`. Returns the written paths in that order.
std::vector<std::filesystem::path> write_audit_report(const AuditReport& report, const Vocabulary& vocab,
                                                      const std::filesystem::path& dir);

}  // namespace saeaudit
