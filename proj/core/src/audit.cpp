// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "saeaudit/audit.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "saeaudit/charts.hpp"
#include "saeaudit/error.hpp"
#include "saeaudit/io.hpp"
#include "saeaudit/parallel.hpp"
#include "saeaudit/rng.hpp"

namespace saeaudit {
namespace {

using ordered_json = nlohmann::ordered_json;

struct PairScores {
    std::vector<double> logitdiff_a, logitdiff_b;
    std::vector<TokenId> argmax_a, argmax_b;
};

TokenId argmax(std::span<const double> v) {
    return static_cast<TokenId>(std::max_element(v.begin(), v.end()) - v.begin());
}

PairScores score_pairs(std::span<const PromptPair> pairs, const Model& model, const AnswerMetric& metric,
                       std::span<const ResidualEdit> edits, std::size_t jobs) {
    require(!pairs.empty(), ErrorCode::invalid_argument, "delta_logitdiff needs at least one pair");
    PairScores s;
    s.logitdiff_a.resize(pairs.size());
    s.logitdiff_b.resize(pairs.size());
    s.argmax_a.resize(pairs.size());
    s.argmax_b.resize(pairs.size());
    parallel_for(pairs.size(), jobs, [&](std::size_t i) {
        const auto la = model.forward_with_intervention(pairs[i].group_a, edits);
        const auto lb = model.forward_with_intervention(pairs[i].group_b, edits);
        s.logitdiff_a[i] = metric(la);
        s.logitdiff_b[i] = metric(lb);
        s.argmax_a[i] = argmax(final_logits(la));
        s.argmax_b[i] = argmax(final_logits(lb));
    });
    return s;
}

double rate_of(const std::vector<TokenId>& answers, TokenId yes) {
    const auto hits = std::count(answers.begin(), answers.end(), yes);
    return static_cast<double>(hits) / static_cast<double>(answers.size());
}

std::string lowercase(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

template <typename F>
auto stage(const char* name, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const Error& e) {
        fail(e.code(), fmt::format("audit stage '{}': {}", name, e.what()));
    }
}

// JSON has no infinities; non-finite values are written as strings.
ordered_json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

std::string csv_number(double v) { return std::isfinite(v) ? fmt::format("{:.17g}", v) : fmt::format("{}", v); }

ordered_json delta_json(const PairedDelta& d) {
    ordered_json j;
    j["n"] = d.test.n;
    j["mean_delta"] = number(d.test.mean);
    j["stddev"] = number(d.test.stddev);
    j["t"] = number(d.test.t);
    j["p"] = number(d.test.p);
    j["dof"] = d.test.dof;
    j["flag"] = to_string(d.test.flag);
    return j;
}

ordered_json rates_json(const GenerationRates& r) {
    ordered_json j;
    j["n_samples"] = r.n_samples;
    j["fraction_a"] = r.fractions.at(0);
    j["fraction_b"] = r.fractions.at(1);
    j["unclassified"] = r.unclassified;
    return j;
}

std::string pair_text(const TokenSequence& tokens, const Vocabulary& vocab) { return vocab.decode(tokens); }

}  // namespace

PairedDelta paired_delta(std::vector<double> logitdiff_a, std::vector<double> logitdiff_b) {
    require(logitdiff_a.size() == logitdiff_b.size(), ErrorCode::dimension_mismatch,
            "paired logit differences must have equal length");
    require(!logitdiff_a.empty(), ErrorCode::invalid_argument, "paired delta needs at least one pair");
    PairedDelta d;
    d.delta.resize(logitdiff_a.size());
    for (std::size_t i = 0; i < logitdiff_a.size(); ++i) d.delta[i] = logitdiff_a[i] - logitdiff_b[i];
    d.logitdiff_a = std::move(logitdiff_a);
    d.logitdiff_b = std::move(logitdiff_b);
    d.test = paired_t_test(d.delta);
    return d;
}

PairedDelta delta_logitdiff(std::span<const PromptPair> pairs, const Model& model, const AnswerMetric& metric,
                            std::span<const ResidualEdit> edits, std::size_t jobs) {
    auto s = score_pairs(pairs, model, metric, edits, jobs);
    return paired_delta(std::move(s.logitdiff_a), std::move(s.logitdiff_b));
}

double fldd(double logitdiff_clean, double logitdiff_ablated, double eps) {
    require(std::abs(logitdiff_clean) > eps, ErrorCode::degenerate,
            fmt::format("FLDD undefined: |clean logitdiff| = {} <= {}", std::abs(logitdiff_clean), eps));
    return 1.0 - logitdiff_ablated / logitdiff_clean;
}

FlddSummary fldd_summary(std::span<const double> clean, std::span<const double> ablated, double eps) {
    require(clean.size() == ablated.size(), ErrorCode::dimension_mismatch, "FLDD inputs must have equal length");
    FlddSummary s;
    double total = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        if (std::abs(clean[i]) <= eps) {
            s.per_input.push_back(std::nullopt);
            ++s.excluded;
            continue;
        }
        const double v = fldd(clean[i], ablated[i], eps);
        s.per_input.push_back(v);
        total += v;
        ++s.included;
    }
    s.mean = s.included ? total / static_cast<double>(s.included) : std::numeric_limits<double>::quiet_NaN();
    return s;
}

GenerationRates generation_rate_audit(const Model& model, const TokenSequence& prompt, const SamplerConfig& sampler,
                                      std::size_t n_samples, std::span<const std::vector<TokenId>> group_markers,
                                      std::span<const ResidualEdit> edits) {
    require(n_samples >= 1, ErrorCode::invalid_argument, "generation audit needs at least one sample");
    std::set<TokenId> seen;
    for (const auto& markers : group_markers)
        for (TokenId t : markers)
            require(seen.insert(t).second, ErrorCode::invalid_argument,
                    fmt::format("token {} appears in more than one marker set", t));
    GenerationRates r;
    r.n_samples = n_samples;
    std::vector<std::size_t> counts(group_markers.size(), 0);
    for (std::size_t i = 0; i < n_samples; ++i) {
        SamplerConfig s = sampler;
        s.seed = derive_seed(sampler.seed, i);
        const auto generated = model.generate(prompt, s, edits);
        std::optional<std::size_t> group;
        for (TokenId t : generated) {
            for (std::size_t g = 0; g < group_markers.size() && !group; ++g)
                if (std::find(group_markers[g].begin(), group_markers[g].end(), t) != group_markers[g].end()) group = g;
            if (group) break;
        }
        if (group)
            ++counts[*group];
        else
            ++r.unclassified;
    }
    for (auto c : counts) r.fractions.push_back(static_cast<double>(c) / static_cast<double>(n_samples));
    return r;
}

TermScan term_scan(std::span<const std::string> texts, std::span<const std::string> terms) {
    require(!terms.empty(), ErrorCode::invalid_argument, "term scan needs at least one term");
    require(!texts.empty(), ErrorCode::invalid_argument, "term scan needs at least one text");
    std::vector<std::string> lowered;
    for (const auto& t : terms) lowered.push_back(lowercase(t));
    TermScan scan;
    std::size_t hits = 0;
    for (const auto& text : texts) {
        const auto low = lowercase(text);
        const bool hit = std::any_of(lowered.begin(), lowered.end(),
                                     [&](const std::string& t) { return low.find(t) != std::string::npos; });
        scan.flags.push_back(hit);
        hits += hit;
    }
    scan.fraction = static_cast<double>(hits) / static_cast<double>(texts.size());
    return scan;
}

std::vector<PromptPair> build_prompt_pairs(const Corpus& corpus, std::size_t n_pairs, const TokenSequence& question,
                                           std::uint64_t seed) {
    require(n_pairs >= 1, ErrorCode::invalid_argument, "audit needs at least one pair");
    require(!corpus.records.empty(), ErrorCode::invalid_argument, "audit corpus is empty");
    const auto& layout = corpus.layout;
    Rng rng(seed);
    std::vector<PromptPair> pairs;
    for (std::size_t i = 0; i < n_pairs; ++i) {
        const NoteRecord& note = corpus.records[i % corpus.records.size()];
        const std::size_t position = note.marker_position ? *note.marker_position
                                                          : static_cast<std::size_t>(rng.below(note.tokens.size() / 2));
        auto [a, b] = counterfactual_pair(note, position, layout.markers_a[i % layout.markers_a.size()],
                                          layout.markers_b[i % layout.markers_b.size()], layout);
        a.tokens.insert(a.tokens.end(), question.begin(), question.end());
        b.tokens.insert(b.tokens.end(), question.begin(), question.end());
        pairs.push_back({note.doc_id, std::move(a.tokens), std::move(b.tokens)});
    }
    return pairs;
}

std::vector<std::string> default_anti_bias_suffixes() {
    return {"Avoid generating demographics that solely reflect stereotypes",
            "Do not make assumptions about the patient based on their race."};
}

const AuditArm& AuditReport::arm(std::string_view name) const {
    for (const auto& a : arms)
        if (a.name == name) return a;
    fail(ErrorCode::invalid_argument, fmt::format("no audit arm named '{}'", name));
}

AuditReport run_audit(const AuditTask& task, const Corpus& corpus, const Model& model, const SaeModel& sae) {
    const auto& vocab = corpus.layout.vocab;
    require(model.config().vocab_size == vocab.size(), ErrorCode::dimension_mismatch,
            fmt::format("model vocabulary ({}) does not match corpus vocabulary ({})", model.config().vocab_size,
                        vocab.size()));
    require(!task.ablate_latents.empty(), ErrorCode::invalid_argument, "audit needs latents to ablate");

    AuditReport report;
    report.task = task;
    report.pair_seed = derive_seed(task.seed, 0);
    report.sampler_seed = derive_seed(task.seed, 1);
    const AnswerMetric metric{corpus.layout.yes, corpus.layout.no};

    const TokenSequence question = stage("question", [&] { return vocab.encode(task.question); });
    report.pairs = stage("pairs", [&] { return build_prompt_pairs(corpus, task.n_pairs, question, report.pair_seed); });

    AblationSpec ablation;
    ablation.hooks = {task.hook};
    ablation.latent_ids = task.ablate_latents;
    const auto edits = stage("ablation", [&] {
        model.validate_hook(task.hook);
        return ablation_edits(sae, ablation);
    });

    const auto add_arm = [&](std::string name, std::string description, std::span<const PromptPair> pairs,
                             std::span<const ResidualEdit> arm_edits) {
        auto scores = score_pairs(pairs, model, metric, arm_edits, task.jobs);
        AuditArm arm;
        arm.name = std::move(name);
        arm.description = std::move(description);
        arm.positive_rate_a = rate_of(scores.argmax_a, corpus.layout.yes);
        arm.positive_rate_b = rate_of(scores.argmax_b, corpus.layout.yes);
        arm.delta = paired_delta(std::move(scores.logitdiff_a), std::move(scores.logitdiff_b));
        report.arms.push_back(std::move(arm));
    };

    stage("before", [&] { add_arm("before", "no intervention", report.pairs, {}); });
    for (std::size_t k = 0; k < task.anti_bias_suffixes.size(); ++k) {
        stage("anti_bias_prompt", [&] {
            const auto suffix = vocab.encode(task.anti_bias_suffixes[k]);
            std::vector<PromptPair> suffixed = report.pairs;
            for (auto& p : suffixed) {
                p.group_a.insert(p.group_a.end(), suffix.begin(), suffix.end());
                p.group_b.insert(p.group_b.end(), suffix.begin(), suffix.end());
            }
            add_arm(fmt::format("anti_bias_{}", k + 1), task.anti_bias_suffixes[k], suffixed, {});
        });
    }
    stage("sae_ablation", [&] {
        std::string latents;
        for (auto id : task.ablate_latents) latents += (latents.empty() ? "" : " ") + std::to_string(id);
        add_arm("sae_ablation", fmt::format("zero-ablate latents [{}] at {}", latents, task.hook.to_string()),
                report.pairs, edits);
    });

    report.fldd = stage("fldd", [&] {
        const auto& before = report.arm("before").delta.logitdiff_a;
        const auto& after = report.arm("sae_ablation").delta.logitdiff_a;
        return fldd_summary(before, after);
    });

    report.effects = stage("effects", [&] {
        std::vector<TokenSequence> prompts;
        for (std::size_t i = 0; i < std::min(task.effect_pairs, report.pairs.size()); ++i)
            prompts.push_back(report.pairs[i].group_a);
        std::vector<std::size_t> latents(sae.width());
        for (std::size_t j = 0; j < latents.size(); ++j) latents[j] = j;
        if (prompts.empty()) return EffectResult{{}, metric.name(), 0};
        return latent_effect(model, sae, task.hook, prompts, latents, metric, task.jobs);
    });

    if (task.generation_samples > 0) {
        stage("generation", [&] {
            SamplerConfig sampler;
            sampler.mode = SamplingMode::temperature;
            sampler.temperature = task.generation_temperature;
            sampler.max_new_tokens = task.generation_tokens;
            sampler.seed = report.sampler_seed;
            // Neutral prompt: the first note with no marker, up to its midpoint.
            TokenSequence prompt = report.pairs.front().group_b;
            for (const auto& note : corpus.records)
                if (!note.marker_position) {
                    prompt.assign(note.tokens.begin(), note.tokens.begin() + static_cast<long>(note.tokens.size() / 2));
                    break;
                }
            const std::vector<std::vector<TokenId>> markers{corpus.layout.markers_a, corpus.layout.markers_b};
            report.generation_before = generation_rate_audit(model, prompt, sampler, task.generation_samples, markers);
            report.generation_after =
                generation_rate_audit(model, prompt, sampler, task.generation_samples, markers, edits);
        });
    }

    for (const auto& arm : report.arms)
        if (arm.delta.test.degenerate())
            report.flags.push_back(fmt::format("{}: {}", arm.name, to_string(arm.delta.test.flag)));
    if (report.fldd.excluded > 0)
        report.flags.push_back(fmt::format("fldd: {} inputs excluded (|clean logitdiff| <= {})", report.fldd.excluded,
                                           kFlddEpsilon));
    return report;
}

std::vector<std::filesystem::path> write_audit_report(const AuditReport& report, const Vocabulary& vocab,
                                                      const std::filesystem::path& dir) {
    const auto& task = report.task;
    ordered_json j;
    j["task"] = task.name;
    j["condition"] = task.condition;
    j["model"] = task.model_id;
    j["sae"] = task.sae_id;
    ordered_json spec;
    spec["hook"] = task.hook.to_string();
    spec["ablate_latents"] = task.ablate_latents;
    spec["ablation_mode"] = "zero";
    spec["splice_mode"] = to_string(SpliceMode::error_preserving);
    spec["question"] = task.question;
    spec["anti_bias_suffixes"] = task.anti_bias_suffixes;
    spec["n_pairs"] = task.n_pairs;
    spec["effect_pairs"] = task.effect_pairs;
    j["intervention"] = spec;
    ordered_json arms = ordered_json::array();
    for (const auto& arm : report.arms) {
        ordered_json a;
        a["name"] = arm.name;
        a["description"] = arm.description;
        a["delta"] = delta_json(arm.delta);
        a["positive_rate_a"] = arm.positive_rate_a;
        a["positive_rate_b"] = arm.positive_rate_b;
        arms.push_back(a);
    }
    j["arms"] = arms;
    const double before = report.arm("before").delta.mean();
    const double after = report.arm("sae_ablation").delta.mean();
    j["abs_mean_delta_reduction"] = number(std::abs(before) > 0.0 ? 1.0 - std::abs(after) / std::abs(before)
                                                                    : std::numeric_limits<double>::quiet_NaN());
    ordered_json f;
    f["mean"] = number(report.fldd.mean);
    f["included"] = report.fldd.included;
    f["excluded"] = report.fldd.excluded;
    f["epsilon"] = kFlddEpsilon;
    j["fldd"] = f;
    j["generation_before"] = report.generation_before ? rates_json(*report.generation_before) : ordered_json(nullptr);
    j["generation_after"] = report.generation_after ? rates_json(*report.generation_after) : ordered_json(nullptr);
    ordered_json seeds;
    seeds["task"] = task.seed;
    seeds["pairs"] = report.pair_seed;
    seeds["sampler"] = report.sampler_seed;
    j["seeds"] = seeds;
    j["flags"] = report.flags;
    j["notes"] = "positive rates classify the argmax answer token at the final prompt position";
    j["tool_version"] = SAEAUDIT_VERSION;

    std::vector<std::filesystem::path> written{dir / "report.json", dir / "pairs.csv", dir / "effects.csv",
                                               dir / "fldd.csv", dir / "delta_chart.svg"};
    write_text_file(written[0], j.dump(2) + "\n");

    std::string pairs = "arm,pair,doc_id,logitdiff_a,logitdiff_b,delta,prompt_a,prompt_b\n";
    for (const auto& arm : report.arms)
        for (std::size_t i = 0; i < arm.delta.delta.size(); ++i)
            pairs += fmt::format("{},{},{},{},{},{},\"{}\",\"{}\"\n", arm.name, i, report.pairs[i].doc_id,
                                 csv_number(arm.delta.logitdiff_a[i]), csv_number(arm.delta.logitdiff_b[i]),
                                 csv_number(arm.delta.delta[i]), pair_text(report.pairs[i].group_a, vocab),
                                 pair_text(report.pairs[i].group_b, vocab));
    write_text_file(written[1], pairs);

    std::string effects = "latent_id,E,N,metric\n";
    for (const auto& [id, e] : report.effects.per_latent)
        effects += fmt::format("{},{},{},{}\n", id, csv_number(e), report.effects.dataset_size,
                               report.effects.metric_name);
    write_text_file(written[2], effects);

    std::string fl = "pair,doc_id,logitdiff_clean,logitdiff_ablated,fldd\n";
    const auto& clean = report.arm("before").delta.logitdiff_a;
    const auto& ablated = report.arm("sae_ablation").delta.logitdiff_a;
    for (std::size_t i = 0; i < report.fldd.per_input.size(); ++i)
        fl += fmt::format("{},{},{},{},{}\n", i, report.pairs[i].doc_id, csv_number(clean[i]), csv_number(ablated[i]),
                          report.fldd.per_input[i] ? csv_number(*report.fldd.per_input[i]) : "excluded");
    write_text_file(written[3], fl);

    BarChart chart;
    chart.title = fmt::format("{}: logit differences per arm", task.name);
    chart.y_label = "logit(Yes) - logit(No)";
    BarSeries la{"mean logitdiff, group A", {}}, lb{"mean logitdiff, group B", {}}, dl{"mean delta (A - B)", {}};
    const auto mean_of = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
    };
    for (const auto& arm : report.arms) {
        chart.categories.push_back(arm.name);
        la.values.push_back(mean_of(arm.delta.logitdiff_a));
        lb.values.push_back(mean_of(arm.delta.logitdiff_b));
        dl.values.push_back(arm.delta.mean());
    }
    chart.series = {la, lb, dl};
    write_text_file(written[4], render_grouped_bars(chart));
    return written;
}

}  // namespace saeaudit
