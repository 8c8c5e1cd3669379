// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <algorithm>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "config.hpp"
#include "manifest.hpp"
#include "saeaudit/audit.hpp"
#include "saeaudit/corpus.hpp"
#include "saeaudit/digest.hpp"
#include "saeaudit/error.hpp"
#include "saeaudit/interp.hpp"
#include "saeaudit/intervene.hpp"
#include "saeaudit/io.hpp"
#include "saeaudit/planted.hpp"
#include "saeaudit/probe.hpp"
#include "saeaudit/rng.hpp"
#include "saeaudit/sae.hpp"

namespace saeaudit::cli {
namespace {

using ordered_json = nlohmann::ordered_json;

struct Context {
    const CommonOptions& options;
    FlatConfig config;
    OutputDir out;
    RunRecord run;
    std::uint64_t seed = 0;

    Context(const CommonOptions& o, FlatConfig c, const std::string& command)
        : options(o), config(std::move(c)), out(o.out_dir) {
        run.command = command;
    }
};

std::string num(double v) { return fmt::format("{:.17g}", v); }

std::vector<std::string> words_of(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> out;
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

std::filesystem::path input_path(Context& ctx, const std::string& key) {
    const auto p = ctx.config.path(key);
    require(std::filesystem::exists(p), ErrorCode::io, fmt::format("{} '{}' does not exist", key, p.string()));
    ctx.run.inputs.push_back(p);
    return p;
}

Corpus load_corpus_input(Context& ctx, const std::string& key = "corpus") {
    return load_corpus(input_path(ctx, key));
}

Model load_model_input(Context& ctx) {
    Model model = Model::load(input_path(ctx, "model"));
    const auto precision = ctx.config.get<std::string>("precision", std::string(to_string(model.config().precision)));
    const Precision wanted = parse_precision(precision);
    if (wanted == model.config().precision) return model;
    ModelConfig cfg = model.config();
    cfg.precision = wanted;
    return Model(cfg, model.weights(), model.planted_spec());
}

SaeModel load_sae_input(Context& ctx, const Model& model) {
    SaeModel sae = load_sae(input_path(ctx, "sae"));
    require(sae.d_model() == model.config().d_model, ErrorCode::dimension_mismatch,
            fmt::format("SAE d_model {} does not match model d_model {}", sae.d_model(), model.config().d_model));
    return sae;
}

void check_vocab(const Model& model, const Corpus& corpus) {
    require(model.config().vocab_size == corpus.layout.vocab.size(), ErrorCode::dimension_mismatch,
            fmt::format("model vocabulary ({}) does not match corpus vocabulary ({})", model.config().vocab_size,
                        corpus.layout.vocab.size()));
}

HookPoint hook_of(Context& ctx, const SaeModel* sae) {
    const std::string fallback = sae && sae->hook ? sae->hook->to_string() : "1.pre";
    const auto hook = HookPoint::parse(ctx.config.get<std::string>("hook", fallback));
    if (sae && sae->hook)
        require(*sae->hook == hook, ErrorCode::invalid_argument,
                fmt::format("SAE was trained at {}, not {}", sae->hook->to_string(), hook.to_string()));
    return hook;
}

// A list of latent ids, or "planted": the latent whose decoder column best
// matches the model's planted group direction.
std::vector<std::size_t> latents_of(Context& ctx, const std::string& key, const Model& model, const SaeModel& sae,
                                    std::optional<std::vector<std::size_t>> fallback = std::nullopt) {
    if (!ctx.config.has(key)) {
        require(fallback.has_value(), ErrorCode::invalid_argument, fmt::format("missing required config key '{}'", key));
        ctx.config.set(key, *fallback);
        return ctx.config.need<std::vector<std::size_t>>(key);
    }
    std::vector<std::size_t> ids;
    try {
        if (ctx.config.need<nlohmann::json>(key).is_string()) {
            require(ctx.config.need<std::string>(key) == "planted", ErrorCode::invalid_argument,
                    fmt::format("config key '{}' must be a list of latent ids or \"planted\"", key));
            require(model.planted_spec().has_value(), ErrorCode::invalid_argument,
                    "\"planted\" latent selection needs a planted model");
            ids = {best_aligned_latent(sae, model.planted_spec()->concept_directions.at(kGroupConcept))};
        } else if (ctx.config.need<nlohmann::json>(key).is_number_unsigned()) {
            ids = {ctx.config.need<std::size_t>(key)};
        } else {
            ids = ctx.config.need<std::vector<std::size_t>>(key);
        }
    } catch (const nlohmann::json::exception&) {
        fail(ErrorCode::invalid_argument, fmt::format("config key '{}' must be a list of latent ids", key));
    }
    for (auto id : ids)
        require(id < sae.width(), ErrorCode::out_of_range, fmt::format("latent {} outside SAE width {}", id, sae.width()));
    return ids;
}

std::vector<TokenSequence> prompts_of(Context& ctx, const Corpus& corpus, std::size_t fallback_n) {
    const auto n = ctx.config.get<std::size_t>("n_prompts", fallback_n);
    const auto question = corpus.layout.vocab.encode(ctx.config.get<std::string>("question", "Yes or No"));
    require(n >= 1, ErrorCode::invalid_argument, "n_prompts must be >= 1");
    std::vector<TokenSequence> prompts;
    for (std::size_t i = 0; i < std::min(n, corpus.records.size()); ++i) {
        auto p = corpus.records[i].tokens;
        p.insert(p.end(), question.begin(), question.end());
        prompts.push_back(std::move(p));
    }
    require(!prompts.empty(), ErrorCode::invalid_argument, "corpus has no notes to prompt with");
    return prompts;
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

// ---------------------------------------------------------------- commands

void gen_corpus(Context& ctx) {
    auto& c = ctx.config;
    CorpusSpec spec;
    spec.n_docs = c.get<std::size_t>("n_docs", spec.n_docs);
    spec.min_length = c.get<std::size_t>("min_length", spec.min_length);
    spec.max_length = c.get<std::size_t>("max_length", spec.max_length);
    spec.marker_rate = c.get<double>("marker_rate", spec.marker_rate);
    spec.correlation = c.get<double>("correlation", spec.correlation);
    spec.condition_rate = c.get<double>("condition_rate", spec.condition_rate);
    spec.seed = ctx.seed;
    std::vector<std::string> extra = words_of("Yes or No");
    for (const auto& s : default_anti_bias_suffixes())
        for (auto& w : words_of(s)) extra.push_back(w);
    for (const auto& text : c.get<std::vector<std::string>>("prompt_texts", {}))
        for (auto& w : words_of(text)) extra.push_back(w);
    Corpus corpus;
    corpus.layout = make_layout(c.get<std::size_t>("n_fillers", 40), c.get<std::size_t>("n_markers", 48),
                                c.get<std::size_t>("n_conditions", 4), extra);
    corpus.spec = spec;
    corpus.records = generate_corpus(spec, corpus.layout);

    SplitSpec split_spec{c.get<double>("train_fraction", 0.8), derive_seed(ctx.seed, 1)};
    auto [train, test] = split(corpus.records, split_spec);
    ctx.run.seeds["corpus"] = spec.seed;
    ctx.run.seeds["split"] = split_spec.seed;

    save_corpus(corpus, ctx.out.file("corpus.jsonl"));
    Corpus part = corpus;
    part.records = std::move(train);
    save_corpus(part, ctx.out.file("train.jsonl"));
    part.records = std::move(test);
    save_corpus(part, ctx.out.file("test.jsonl"));
}

void build_model(Context& ctx) {
    auto& c = ctx.config;
    const Corpus corpus = load_corpus_input(ctx);
    CorpusModelConfig mc;
    mc.d_model = c.get<std::size_t>("d_model", mc.d_model);
    mc.n_layers = c.get<std::size_t>("n_layers", mc.n_layers);
    mc.n_heads = c.get<std::size_t>("n_heads", mc.n_heads);
    mc.d_mlp = c.get<std::size_t>("d_mlp", mc.d_mlp);
    mc.max_seq = c.get<std::size_t>("max_seq", mc.max_seq);
    mc.precision = parse_precision(c.get<std::string>("precision", "fp64"));
    mc.planted = c.get<bool>("planted", mc.planted);
    mc.marker_magnitude = c.get<double>("marker_magnitude", mc.marker_magnitude);
    mc.condition_magnitude = c.get<double>("condition_magnitude", mc.condition_magnitude);
    mc.yes_coupling = c.get<double>("yes_coupling", mc.yes_coupling);
    mc.seed = ctx.seed;
    ctx.run.seeds["model"] = mc.seed;
    build_corpus_model(corpus.layout, mc).save(ctx.out.file("model.bin"));
}

void train_sae_cmd(Context& ctx) {
    auto& c = ctx.config;
    const Model model = load_model_input(ctx);
    const Corpus corpus = load_corpus_input(ctx);
    check_vocab(model, corpus);
    const HookPoint hook = hook_of(ctx, nullptr);
    SaeTrainConfig tc;
    tc.sparsity_weight = c.get<double>("sparsity_weight", 0.2);
    tc.learning_rate = c.get<double>("learning_rate", tc.learning_rate);
    tc.steps = c.get<std::size_t>("steps", 3000);
    tc.batch_size = c.get<std::size_t>("batch_size", 64);
    tc.seed = ctx.seed;
    const auto width = c.get<std::size_t>("width", 64);
    require(c.get<std::string>("activation", "relu") == "relu", ErrorCode::invalid_argument,
            "only relu SAEs can be trained");

    std::vector<double> rows;
    std::size_t n_rows = 0;
    for (const auto& r : corpus.records) {
        const auto h = model.capture(r.tokens, hook);
        rows.insert(rows.end(), h.data().begin(), h.data().end());
        n_rows += h.rows();
    }
    const Matrix acts(n_rows, model.config().d_model, std::move(rows));
    auto trained = train_sae(tc, width, acts);
    trained.sae.hook = hook;
    ctx.run.seeds["sae"] = tc.seed;

    save_sae(trained.sae, ctx.out.file("sae.bin"));
    ordered_json stats;
    stats["rows"] = n_rows;
    stats["final_mse"] = trained.stats.final_mse;
    stats["mean_l0"] = trained.stats.mean_l0;
    stats["r_squared"] = trained.stats.r_squared;
    stats["dead_latents"] = trained.stats.dead_latents;
    if (model.planted_spec()) {
        const auto& dir = model.planted_spec()->concept_directions.at(kGroupConcept);
        const auto best = best_aligned_latent(trained.sae, dir);
        stats["planted_latent"] = best;
        stats["planted_cosine"] = decoder_cosines(trained.sae, dir)[best];
    }
    write_text_file(ctx.out.file("train_stats.json"), stats.dump(2) + "\n");
    std::string curve = "step,mse\n";
    for (std::size_t i = 0; i < trained.stats.mse_curve.size(); ++i)
        curve += fmt::format("{},{}\n", i, num(trained.stats.mse_curve[i]));
    write_text_file(ctx.out.file("mse_curve.csv"), curve);
}

std::pair<FeatureMatrix, LabelVector> features_of(const Model& model, const SaeModel& sae, HookPoint hook,
                                                  const Corpus& corpus, std::size_t jobs) {
    std::vector<TokenSequence> docs;
    std::vector<std::uint64_t> ids;
    LabelVector labels;
    for (const auto& r : corpus.records) {
        docs.push_back(r.tokens);
        ids.push_back(r.doc_id);
        labels.push_back(r.group == Group::a ? 1 : 0);
    }
    return {build_feature_matrix(model, sae, hook, docs, ids, jobs), labels};
}

void probe_cmd(Context& ctx) {
    auto& c = ctx.config;
    const Model model = load_model_input(ctx);
    const SaeModel sae = load_sae_input(ctx, model);
    const Corpus train = load_corpus_input(ctx, "corpus");
    const Corpus test = load_corpus_input(ctx, "test_corpus");
    check_vocab(model, train);
    check_vocab(model, test);
    const HookPoint hook = hook_of(ctx, &sae);

    ProbeFitConfig fit;
    fit.max_iter = c.get<std::size_t>("max_iter", fit.max_iter);
    fit.tol = c.get<double>("tol", fit.tol);
    fit.seed = ctx.seed;
    ctx.run.seeds["probe"] = fit.seed;
    const auto top_k = c.get<std::size_t>("top_k", 5);

    auto [ftrain, ytrain] = features_of(model, sae, hook, train, ctx.options.jobs);
    auto [ftest, ytest] = features_of(model, sae, hook, test, ctx.options.jobs);

    ordered_json report;
    if (c.has("lambda")) {
        fit.lambda_l1 = c.need<double>("lambda");
        report["lambda_selection"] = nullptr;
    } else {
        const auto grid = c.get<std::vector<double>>("lambda_grid", {1e-3, 1e-2, 1e-1});
        const auto sel = select_probe_lambda(ftrain.values, ytrain, grid,
                                             c.get<double>("validation_fraction", 0.2), fit);
        fit.lambda_l1 = sel.chosen;
        ordered_json s;
        s["grid"] = sel.grid;
        s["validation_accuracy"] = sel.validation_accuracy;
        s["chosen"] = sel.chosen;
        report["lambda_selection"] = s;
    }
    const ProbeModel probe = fit_probe(ftrain.values, ytrain, fit);

    std::vector<double> decisions;
    for (std::size_t i = 0; i < ftest.values.rows(); ++i) decisions.push_back(probe.decision(ftest.values.row(i)));
    report["lambda"] = probe.lambda_l1;
    report["train_accuracy"] = probe_accuracy(probe, ftrain.values, ytrain);
    report["test_accuracy"] = probe_accuracy(probe, ftest.values, ytest);
    report["test_auroc"] = auroc(decisions, ytest);
    ordered_json conv;
    conv["iterations"] = probe.convergence.iterations;
    conv["final_objective"] = probe.convergence.final_objective;
    conv["converged"] = probe.convergence.converged;
    conv["step_size"] = probe.convergence.step_size;
    report["convergence"] = conv;
    report["nonzero_weights"] = std::count_if(probe.weights.begin(), probe.weights.end(), [](double w) { return w != 0.0; });
    if (!probe.convergence.converged) ctx.run.flags.push_back("probe: iteration cap reached before convergence");

    std::optional<std::vector<double>> cosines;
    if (model.planted_spec())
        cosines = decoder_cosines(sae, model.planted_spec()->concept_directions.at(kGroupConcept));
    std::string csv = "rank,latent_id,weight,test_auroc,planted_cosine\n";
    const auto top = top_latents(probe, top_k);
    for (std::size_t r = 0; r < top.size(); ++r) {
        const auto id = top[r].latent_id;
        csv += fmt::format("{},{},{},{},{}\n", r + 1, id, num(top[r].weight), num(auroc(ftest.values.column(id), ytest)),
                           cosines ? num((*cosines)[id]) : "");
    }
    if (cosines)
        report["planted_latent"] = std::max_element(cosines->begin(), cosines->end()) - cosines->begin();

    save_features(ftrain, ctx.out.file("features_train.bin"));
    save_features(ftest, ctx.out.file("features_test.bin"));
    save_probe(probe, ctx.out.file("probe.bin"));
    write_text_file(ctx.out.file("top_latents.csv"), csv);
    write_text_file(ctx.out.file("probe_report.json"), report.dump(2) + "\n");
}

void interp_cmd(Context& ctx) {
    auto& c = ctx.config;
    const Model model = load_model_input(ctx);
    const SaeModel sae = load_sae_input(ctx, model);
    const Corpus corpus = load_corpus_input(ctx);
    check_vocab(model, corpus);
    const HookPoint hook = hook_of(ctx, &sae);
    const auto latents = latents_of(ctx, "latents", model, sae);
    const auto k = c.get<std::size_t>("k", 20);
    const auto per_tercile = c.get<std::size_t>("per_tercile", 5);
    const auto radius = c.get<std::size_t>("context_radius", kDefaultContextRadius);
    const auto judge_name = c.get<std::string>("judge", "keyword");
    require(judge_name == "keyword" || judge_name == "random", ErrorCode::invalid_argument,
            fmt::format("unknown judge '{}'", judge_name));
    std::vector<LatentDescription> catalog;
    if (c.has("catalog")) catalog = load_catalog(input_path(ctx, "catalog"));
    const auto& vocab = corpus.layout.vocab;

    std::vector<DocumentActivations> acts(corpus.records.size());
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        const auto& r = corpus.records[i];
        acts[i] = {r.doc_id, r.tokens, document_latents(model, sae, hook, r.tokens)};
    }

    ctx.run.seeds["eval_set"] = derive_seed(ctx.seed, 0);
    ctx.run.seeds["judge"] = derive_seed(ctx.seed, 1);
    std::vector<LatentDescription> scored;
    for (auto latent : latents) {
        const auto top = top_activating(acts, latent, k, radius);
        write_activation_records_csv(top, vocab, ctx.out.file(fmt::format("top_{}.csv", latent)));

        LatentDescription desc;
        desc.latent_id = latent;
        const auto it = std::find_if(catalog.begin(), catalog.end(),
                                     [&](const LatentDescription& d) { return d.latent_id == latent; });
        if (it != catalog.end()) {
            desc = *it;
        } else {
            // Generated description: the token most often under the top activations.
            std::map<TokenId, std::size_t> counts;
            for (const auto& rec : top) ++counts[rec.context[rec.token_index - rec.context_start]];
            TokenId best = 0;
            std::size_t best_count = 0;
            for (const auto& [tok, n] : counts)
                if (n > best_count) best = tok, best_count = n;
            desc.text = top.empty() ? "never active" : fmt::format("fires on {}", vocab.word(best));
            desc.source = DescriptionSource::generated;
        }

        std::size_t positives = 0;
        for (const auto& d : acts)
            for (std::size_t t = 0; t < d.latents.rows(); ++t) positives += d.latents(t, latent) > 0.0;
        if (positives < 3) {
            ctx.run.flags.push_back(fmt::format("interp: latent {} has {} positive activations, not scored", latent,
                                                positives));
            scored.push_back(desc);
            continue;
        }
        const auto eval = build_eval_set(acts, latent, per_tercile, ctx.run.seeds["eval_set"], radius);
        std::vector<TokenId> keywords;
        for (const auto& w : words_of(desc.text))
            if (auto id = vocab.find(w)) keywords.push_back(*id);
        std::unique_ptr<Judge> judge;
        if (judge_name == "keyword")
            judge = std::make_unique<KeywordJudge>(keywords);
        else
            judge = std::make_unique<RandomJudge>(ctx.run.seeds["judge"]);
        desc.detection_score = score_description(desc, eval, *judge, ctx.run.seeds["judge"]);
        scored.push_back(desc);
    }
    save_catalog(scored, ctx.out.file("catalog.jsonl"));
}

SteerSpec steer_spec_of(Context& ctx, const Model& model, const SaeModel& sae) {
    auto& c = ctx.config;
    SteerSpec spec;
    spec.hook = hook_of(ctx, &sae);
    const auto latents = latents_of(ctx, "latent", model, sae);
    require(latents.size() == 1, ErrorCode::invalid_argument, "steering takes exactly one latent");
    spec.latent_id = latents.front();
    spec.alpha = c.get<double>("alpha", 1.0);
    const auto policy = c.get<std::string>("zmax_policy", "per_input_global_max");
    require(policy == "per_input_global_max" || policy == "fixed_value", ErrorCode::invalid_argument,
            fmt::format("unknown zmax_policy '{}'", policy));
    spec.zmax_policy = policy == "fixed_value" ? ZmaxPolicy::fixed_value : ZmaxPolicy::per_input_global_max;
    if (spec.zmax_policy == ZmaxPolicy::fixed_value) spec.fixed_zmax = c.need<double>("fixed_zmax");
    spec.prompt_only = c.get<bool>("prompt_only", false);
    const auto splice = c.get<std::string>("splice_mode", "error_preserving");
    require(splice == "error_preserving" || splice == "raw", ErrorCode::invalid_argument,
            fmt::format("unknown splice_mode '{}'", splice));
    spec.splice_mode = splice == "raw" ? SpliceMode::raw : SpliceMode::error_preserving;
    spec.validate(sae.width());
    return spec;
}

SamplerConfig sampler_of(Context& ctx, std::uint64_t seed) {
    auto& c = ctx.config;
    SamplerConfig s;
    const auto mode = c.get<std::string>("sampling", "greedy");
    require(mode == "greedy" || mode == "temperature", ErrorCode::invalid_argument,
            fmt::format("unknown sampling mode '{}'", mode));
    s.mode = mode == "greedy" ? SamplingMode::greedy : SamplingMode::temperature;
    s.temperature = c.get<double>("temperature", 1.0);
    s.max_new_tokens = c.get<std::size_t>("max_new_tokens", 4);
    s.seed = seed;
    s.validate();
    return s;
}

void steer_cmd(Context& ctx) {
    auto& c = ctx.config;
    const Model model = load_model_input(ctx);
    const SaeModel sae = load_sae_input(ctx, model);
    const Corpus corpus = load_corpus_input(ctx);
    check_vocab(model, corpus);
    SteerSpec spec = steer_spec_of(ctx, model, sae);
    const auto prompts = prompts_of(ctx, corpus, 8);
    const SamplerConfig sampler = sampler_of(ctx, derive_seed(ctx.seed, 0));
    ctx.run.seeds["sampler"] = sampler.seed;
    const auto& vocab = corpus.layout.vocab;
    const TokenId yes = corpus.layout.yes;
    const AnswerMetric metric{yes, corpus.layout.no};

    if (c.get<bool>("select_alpha", false)) {
        const auto grid = c.get<std::vector<double>>("alpha_grid", default_alpha_grid());
        std::optional<Model> scorer_model;
        if (c.has("scorer_model")) scorer_model = Model::load(input_path(ctx, "scorer_model"));
        const ModelScorer scorer(scorer_model ? *scorer_model : model);
        const std::vector<TokenId> positive{yes};
        const auto sel = select_alpha(model, sae, prompts, spec, grid, scorer, positive, sampler);
        std::string csv = "alpha,positive_rate,perplexity,ratio,chosen\n";
        for (const auto& s : sel.scores)
            csv += fmt::format("{},{},{},{},{}\n", num(s.alpha), num(s.positive_rate), num(s.perplexity), num(s.ratio),
                               s.alpha == sel.chosen ? 1 : 0);
        write_text_file(ctx.out.file("alpha_selection.csv"), csv);
        spec.alpha = sel.chosen;
    }

    std::string csv = "prompt,alpha,clean_logitdiff,steered_logitdiff,yes_logit_shift,generated\n";
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        const auto clean = model.forward(prompts[i]);
        const auto steered = apply_steering(model, sae, prompts[i], spec);
        SamplerConfig s = sampler;
        s.seed = derive_seed(sampler.seed, i);
        const auto generated = generate_steered(model, sae, prompts[i], spec, s);
        csv += fmt::format("{},{},{},{},{},{}\n", i, num(spec.alpha), num(metric(clean)), num(metric(steered)),
                           num(final_logits(steered)[yes] - final_logits(clean)[yes]), quoted(vocab.decode(generated)));
    }
    write_text_file(ctx.out.file("steer.csv"), csv);
}

void ablate_cmd(Context& ctx) {
    const Model model = load_model_input(ctx);
    const SaeModel sae = load_sae_input(ctx, model);
    const Corpus corpus = load_corpus_input(ctx);
    check_vocab(model, corpus);
    AblationSpec spec;
    spec.hooks = {hook_of(ctx, &sae)};
    spec.latent_ids = latents_of(ctx, "latents", model, sae);
    const auto prompts = prompts_of(ctx, corpus, 40);
    const AnswerMetric metric{corpus.layout.yes, corpus.layout.no};
    std::vector<double> clean(prompts.size()), ablated(prompts.size());
    for (std::size_t i = 0; i < prompts.size(); ++i) {
        clean[i] = metric(model.forward(prompts[i]));
        ablated[i] = metric(zero_ablate(model, sae, prompts[i], spec));
    }
    const auto summary = fldd_summary(clean, ablated);
    if (summary.excluded) ctx.run.flags.push_back(fmt::format("ablate: {} inputs excluded from FLDD", summary.excluded));
    std::string csv = "prompt,doc_id,logitdiff_clean,logitdiff_ablated,fldd\n";
    for (std::size_t i = 0; i < prompts.size(); ++i)
        csv += fmt::format("{},{},{},{},{}\n", i, corpus.records[i].doc_id, num(clean[i]), num(ablated[i]),
                           summary.per_input[i] ? num(*summary.per_input[i]) : "excluded");
    ordered_json j;
    j["latents"] = spec.latent_ids;
    j["hook"] = spec.hooks.front().to_string();
    j["fldd_mean"] = summary.included ? ordered_json(summary.mean) : ordered_json(nullptr);
    j["included"] = summary.included;
    j["excluded"] = summary.excluded;
    write_text_file(ctx.out.file("ablation.csv"), csv);
    write_text_file(ctx.out.file("ablation.json"), j.dump(2) + "\n");
}

void effect_cmd(Context& ctx) {
    const Model model = load_model_input(ctx);
    const SaeModel sae = load_sae_input(ctx, model);
    const Corpus corpus = load_corpus_input(ctx);
    check_vocab(model, corpus);
    const HookPoint hook = hook_of(ctx, &sae);
    std::vector<std::size_t> all(sae.width());
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = j;
    const auto latents = latents_of(ctx, "latents", model, sae, all);
    const auto prompts = prompts_of(ctx, corpus, 16);
    const auto effects = latent_effect(model, sae, hook, prompts, latents,
                                       AnswerMetric{corpus.layout.yes, corpus.layout.no}, ctx.options.jobs);
    write_effects_csv(effects, ctx.out.file("effects.csv"));
}

void audit_cmd(Context& ctx) {
    auto& c = ctx.config;
    const Model model = load_model_input(ctx);
    const SaeModel sae = load_sae_input(ctx, model);
    const Corpus corpus = load_corpus_input(ctx);
    check_vocab(model, corpus);
    AuditTask task;
    task.name = c.get<std::string>("name", task.name);
    task.condition = c.get<std::string>("condition", task.condition);
    task.model_id = sha256_file(ctx.run.inputs[0]);
    task.sae_id = sha256_file(ctx.run.inputs[1]);
    task.hook = hook_of(ctx, &sae);
    task.ablate_latents = latents_of(ctx, "ablate_latents", model, sae);
    task.question = c.get<std::string>("question", task.question);
    task.anti_bias_suffixes = c.get<std::vector<std::string>>("anti_bias_suffixes", task.anti_bias_suffixes);
    task.n_pairs = c.get<std::size_t>("n_pairs", task.n_pairs);
    task.effect_pairs = c.get<std::size_t>("effect_pairs", task.effect_pairs);
    task.generation_samples = c.get<std::size_t>("generation_samples", task.generation_samples);
    task.generation_tokens = c.get<std::size_t>("generation_tokens", task.generation_tokens);
    task.generation_temperature = c.get<double>("generation_temperature", task.generation_temperature);
    task.seed = ctx.seed;
    task.jobs = ctx.options.jobs;
    const auto report = run_audit(task, corpus, model, sae);
    ctx.run.seeds["pairs"] = report.pair_seed;
    ctx.run.seeds["sampler"] = report.sampler_seed;
    for (const auto& f : report.flags) ctx.run.flags.push_back("audit: " + f);
    for (const auto& name : {"report.json", "pairs.csv", "effects.csv", "fldd.csv", "delta_chart.svg"})
        ctx.out.add(ctx.out.dir() / name);
    write_audit_report(report, corpus.layout.vocab, ctx.out.dir());
}

const std::map<std::string, std::function<void(Context&)>>& registry() {
    static const std::map<std::string, std::function<void(Context&)>> commands{
        {"gen-corpus", gen_corpus}, {"build-model", build_model}, {"train-sae", train_sae_cmd},
        {"probe", probe_cmd},       {"interp", interp_cmd},       {"steer", steer_cmd},
        {"ablate", ablate_cmd},     {"effect", effect_cmd},       {"audit", audit_cmd},
    };
    return commands;
}

}  // namespace

std::vector<std::string> command_names() {
    return {"gen-corpus", "build-model", "train-sae", "probe", "interp", "steer", "ablate", "effect", "audit"};
}

std::string command_description(const std::string& name) {
    static const std::map<std::string, std::string> text{
        {"gen-corpus", "generate a synthetic note corpus with train/test splits"},
        {"build-model", "build a (planted) toy transformer over a corpus vocabulary"},
        {"train-sae", "train a relu SAE on residual activations of a corpus"},
        {"probe", "fit an l1 logistic probe on max-aggregated SAE latents"},
        {"interp", "extract top-activating contexts and score latent descriptions"},
        {"steer", "steer one latent and measure answer shifts"},
        {"ablate", "zero-ablate latents and measure answer shifts"},
        {"effect", "exact per-latent ablation effects on the answer metric"},
        {"audit", "counterfactual bias audit with baseline and ablation arms"},
    };
    const auto it = text.find(name);
    return it == text.end() ? "" : it->second;
}

int run_command(const std::string& name, const CommonOptions& options) {
    std::string stage = "config";
    try {
        FlatConfig config = options.config.empty() ? FlatConfig{} : FlatConfig::load(options.config);
        for (const auto& o : options.overrides) config.set_override(o);
        for (const auto& [key, path] : options.inputs)
            config.set(key, std::filesystem::absolute(path).lexically_normal().string());
        if (!options.precision.empty()) config.set("precision", options.precision);
        if (options.seed) config.set("seed", *options.seed);

        stage = "output";
        Context ctx(options, std::move(config), name);
        ctx.seed = ctx.config.get<std::uint64_t>("seed", 0);
        if (ctx.config.has("precision")) parse_precision(ctx.config.need<std::string>("precision"));
        ctx.run.seeds["base"] = ctx.seed;

        stage = name;
        registry().at(name)(ctx);
        const auto unused = ctx.config.unused();
        require(unused.empty(), ErrorCode::invalid_argument,
                fmt::format("unknown config key '{}' for {}", unused.empty() ? "" : unused.front(), name));

        stage = "manifest";
        write_manifest(ctx.run, ctx.config, ctx.out);
        ctx.out.commit();
        for (const auto& f : ctx.run.flags) std::cerr << "saeaudit " << name << ": flag: " << f << '\n';
        if (options.strict && !ctx.run.flags.empty()) return kExitDegenerate;
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "saeaudit " << name << ": " << stage << ": " << e.what() << '\n';
        return kExitError;
    }
}

}  // namespace saeaudit::cli
