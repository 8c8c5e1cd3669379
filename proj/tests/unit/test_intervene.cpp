// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "saeaudit/error.hpp"
#include "saeaudit/intervene.hpp"

using namespace saeaudit;

namespace {

constexpr TokenId kYes = 1, kNo = 2, kInjected = 3;

// Planted model over 12 tokens with a hand SAE whose latent 2 decodes
// exactly to the planted concept direction.
struct PlantedFixture {
    double beta = 1.5;
    PlantedModelSpec spec = test::one_concept_spec(8, kInjected, kYes, 2.0, beta);
    Model model = build_planted_model(test::small_config(), spec, 31);
    SaeModel sae;

    PlantedFixture() {
        Rng rng(32);
        sae = test::random_sae(6, 8, rng);
        const auto& dir = spec.concept_directions.at("c");
        for (std::size_t i = 0; i < 8; ++i) sae.dec_weight(i, 2) = dir[i];
    }
};

// Independent evaluation of one cell: rebuild the residual row by hand with
// z(t, j) removed, run the model with that edit, and difference the metric.
double cell_delta(const Model& model, const SaeModel& sae, HookPoint hook, const TokenSequence& x, std::size_t t,
                  std::size_t j, const AnswerMetric& metric) {
    const ResidualEdit edit{hook, [&](const Matrix& h) {
                                const auto z = encode(sae, h.row(t));
                                Matrix out = h;
                                for (std::size_t i = 0; i < h.cols(); ++i) out(t, i) -= z[j] * sae.dec_weight(i, j);
                                return out;
                            }};
    return metric(model.forward_with_intervention(x, std::span(&edit, 1))) - metric(model.forward(x));
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("steer vector adds alpha times z_max at one index") {
    CHECK(steer_vector({1.0, 2.0, 3.0}, 1, 0.5, 4.0) == LatentVector{1.0, 4.0, 3.0});
    CHECK(steer_vector({1.0, 2.0}, 0, 0.0, 4.0) == LatentVector{1.0, 2.0});
    CHECK_THROWS_AS(steer_vector({1.0}, 1, 1.0, 1.0), Error);
    CHECK_THROWS_AS(steer_vector({1.0}, 0, 1.0, -1.0), Error);
    CHECK(global_zmax(Matrix(2, 2, {0.0, 3.0, 1.0, 2.0})) == 3.0);
    CHECK(global_zmax(Matrix(1, 2, {0.0, 0.0})) == 0.0);
}

TEST_CASE("an unchanged latent matrix splices back bit-exactly") {
    Rng rng(1);
    for (int trial = 0; trial < 20; ++trial) {
        const auto sae = test::random_sae(10, 8, rng);
        const auto h = test::random_matrix(5, 8, rng, 2.0);
        CHECK(splice(sae, h, [](Matrix&) {}) == h);
    }
}

TEST_CASE("splice modes") {
    Rng rng(2);
    const auto sae = test::random_sae(6, 4, rng);
    const auto h = test::random_matrix(3, 4, rng);
    const auto z = encode_rows(sae, h);

    const auto raw = splice(sae, h, [](Matrix&) {}, SpliceMode::raw);
    for (std::size_t t = 0; t < 3; ++t) {
        const auto rec = decode(sae, z.row(t));
        for (std::size_t i = 0; i < 4; ++i) CHECK(raw(t, i) == rec[i]);
    }

    const auto zeroed = splice(sae, h, [](Matrix& m) { m(1, 3) = 0.0; });
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(zeroed(0, i) == h(0, i));
        CHECK(zeroed(1, i) == doctest::Approx(h(1, i) - z(1, 3) * sae.dec_weight(i, 3)).epsilon(1e-14));
        CHECK(zeroed(2, i) == h(2, i));
    }
    CHECK_THROWS_AS(splice(sae, h, [](Matrix& m) { m = Matrix(1, 1); }), Error);
    CHECK_THROWS_AS(splice(sae, Matrix(2, 3), [](Matrix&) {}), Error);
}

TEST_CASE("steering along the planted direction moves the answer by beta alpha z_max") {
    PlantedFixture f;
    const AnswerMetric metric{kYes, kNo};
    const TokenSequence x{5, 6, 7, 8, 9};
    const double clean = metric(f.model.forward(x));
    for (auto hook : {"0.pre", "1.pre", "1.post", "2.pre"}) {
        SteerSpec spec;
        spec.hook = HookPoint::parse(hook);
        spec.latent_id = 2;
        spec.zmax_policy = ZmaxPolicy::fixed_value;
        spec.fixed_zmax = 2.0;
        double previous = -INFINITY;
        for (int k = 0; k < 10; ++k) {
            spec.alpha = 0.5 * k;
            const double steered = metric(apply_steering(f.model, f.sae, x, spec));
            CHECK(steered - clean == doctest::Approx(f.beta * spec.alpha * 2.0).epsilon(1e-9));
            CHECK(steered >= previous);
            previous = steered;
        }
    }
}

TEST_CASE("the default z_max is the clean encoding's global maximum") {
    PlantedFixture f;
    const AnswerMetric metric{kYes, kNo};
    const TokenSequence x{kInjected, 6, 7, 8};
    const auto hook = HookPoint::parse("1.pre");
    const double z_max = global_zmax(encode_rows(f.sae, f.model.capture(x, hook)));
    REQUIRE(z_max > 0.0);
    SteerSpec spec;
    spec.hook = hook;
    spec.latent_id = 2;
    spec.alpha = 0.75;
    const double shift = metric(apply_steering(f.model, f.sae, x, spec)) - metric(f.model.forward(x));
    CHECK(shift == doctest::Approx(f.beta * 0.75 * z_max).epsilon(1e-9));
}

TEST_CASE("prompt-only steering leaves generated positions alone") {
    PlantedFixture f;
    const TokenSequence x{5, 6, 7, 8, 9};
    SteerSpec spec;
    spec.hook = HookPoint::parse("1.pre");
    spec.latent_id = 2;
    spec.alpha = 3.0;
    spec.zmax_policy = ZmaxPolicy::fixed_value;
    spec.fixed_zmax = 1.0;
    spec.prompt_only = true;
    const auto edit = steering_edit(f.sae, spec, 3);
    const auto h = f.model.capture(x, spec.hook);
    const auto edited = edit.transform(h);
    for (std::size_t t = 0; t < 5; ++t) {
        for (std::size_t i = 0; i < 8; ++i) {
            const double expected = t < 3 ? h(t, i) + 3.0 * f.sae.dec_weight(i, 2) : h(t, i);
            CHECK(edited(t, i) == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("steered generation favours Yes as alpha grows") {
    PlantedFixture f;
    SteerSpec spec;
    spec.hook = HookPoint::parse("1.pre");
    spec.latent_id = 2;
    spec.zmax_policy = ZmaxPolicy::fixed_value;
    spec.fixed_zmax = 1.0;
    spec.alpha = 200.0;
    SamplerConfig s;
    s.max_new_tokens = 3;
    const auto gen = generate_steered(f.model, f.sae, {5, 6, 7}, spec, s);
    REQUIRE(gen.size() == 3);
    for (TokenId t : gen) CHECK(t == kYes);
    spec.alpha = 0.0;
    CHECK(generate_steered(f.model, f.sae, {5, 6, 7}, spec, s) == f.model.generate({5, 6, 7}, s));
}

TEST_CASE("spec validation") {
    SteerSpec s;
    s.latent_id = 6;
    CHECK_THROWS_AS(s.validate(6), Error);
    s.latent_id = 0;
    s.alpha = -1.0;
    CHECK_THROWS_AS(s.validate(6), Error);
    s.alpha = 1.0;
    s.zmax_policy = ZmaxPolicy::fixed_value;
    CHECK_THROWS_AS(s.validate(6), Error);
    s.fixed_zmax = 1.0;
    CHECK_NOTHROW(s.validate(6));

    AblationSpec a;
    CHECK_THROWS_AS(a.validate(6), Error);
    a.hooks = {HookPoint::parse("1.pre")};
    CHECK_THROWS_AS(a.validate(6), Error);
    a.latent_ids = {7};
    CHECK_THROWS_AS(a.validate(6), Error);
    a.latent_ids = {1};
    CHECK_NOTHROW(a.validate(6));
    a.hooks.push_back(HookPoint::parse("1.pre"));
    CHECK_THROWS_AS(a.validate(6), Error);
}

TEST_CASE("zero ablation of the planted latent removes the concept's push") {
    PlantedFixture f;
    // Make the encoder read the concept exactly: latent 2 = relu(u . h).
    const auto& dir = f.spec.concept_directions.at("c");
    for (std::size_t i = 0; i < 8; ++i) f.sae.enc_weight(2, i) = dir[i];
    f.sae.enc_bias[2] = 0.0;
    const AnswerMetric metric{kYes, kNo};
    const TokenSequence with{5, kInjected, 7, 8};
    const TokenSequence without{5, 6, 7, 8};
    AblationSpec spec;
    spec.hooks = {HookPoint::parse("1.pre")};
    spec.latent_ids = {2};
    const double drop = metric(f.model.forward(with)) - metric(zero_ablate(f.model, f.sae, with, spec));
    // The final position carries the injected mass 2.0 along u.
    CHECK(drop == doctest::Approx(f.beta * 2.0).epsilon(1e-9));
    CHECK(metric(zero_ablate(f.model, f.sae, without, spec)) ==
          doctest::Approx(metric(f.model.forward(without))).epsilon(1e-12));

    spec.latent_ids = {0, 1, 3, 4, 5};
    CHECK(zero_ablate(f.model, f.sae, without, spec).rows() == 4);
}

TEST_CASE("latent effects equal the brute-force sum over every cell") {
    Rng rng(3);
    const auto model = build_random_model(test::small_config(), 33);
    const auto sae = test::random_sae(12, 8, rng);
    const auto hook = HookPoint::parse("1.pre");
    const AnswerMetric metric{kYes, kNo};
    std::vector<TokenSequence> data;
    for (std::size_t i = 0; i < 4; ++i) data.push_back(test::random_tokens(3 + i, 12, rng));
    std::vector<std::size_t> ids(12);
    for (std::size_t j = 0; j < 12; ++j) ids[j] = j;

    const auto fast = latent_effect(model, sae, hook, data, ids, metric, 1);
    const auto threaded = latent_effect(model, sae, hook, data, ids, metric, 3);
    CHECK(fast.dataset_size == 4);
    CHECK(fast.metric_name == "logitdiff");
    for (std::size_t j : ids) {
        double total = 0.0;
        for (const auto& x : data)
            for (std::size_t t = 0; t < x.size(); ++t) total += cell_delta(model, sae, hook, x, t, j, metric);
        CHECK(fast.per_latent.at(j) == doctest::Approx(total / 4.0).epsilon(1e-12));
        CHECK(threaded.per_latent.at(j) == fast.per_latent.at(j));
    }
}

TEST_CASE("inactive cells contribute exactly zero") {
    Rng rng(4);
    const auto model = build_random_model(test::small_config(), 34);
    const auto sae = test::random_sae(8, 8, rng, -0.5);
    const auto hook = HookPoint::parse("1.post");
    const AnswerMetric metric{kYes, kNo};
    const TokenSequence x = test::random_tokens(5, 12, rng);
    const auto z = encode_rows(sae, model.capture(x, hook));
    std::size_t checked = 0;
    for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t j = 0; j < 8; ++j)
            if (z(t, j) == 0.0) {
                const ResidualEdit edit{hook, [&](const Matrix& h) {
                                            return splice(sae, h, [&](Matrix& m) { m(t, j) = 0.0; });
                                        }};
                CHECK(model.forward_with_intervention(x, std::span(&edit, 1)) == model.forward(x));
                ++checked;
            }
    CHECK(checked > 0);
}

TEST_CASE("latent effect validates and writes csv") {
    Rng rng(5);
    const auto model = build_random_model(test::small_config(), 35);
    const auto sae = test::random_sae(4, 8, rng);
    const AnswerMetric metric{kYes, kNo};
    const std::vector<TokenSequence> data{{1, 2, 3}};
    const std::vector<std::size_t> bad{4};
    CHECK_THROWS_AS(latent_effect(model, sae, HookPoint::parse("1.pre"), data, bad, metric), Error);
    CHECK_THROWS_AS(latent_effect(model, sae, HookPoint::parse("1.pre"), std::vector<TokenSequence>{},
                                  std::vector<std::size_t>{0}, metric),
                    Error);
    CHECK_THROWS_AS(latent_effect(model, sae, HookPoint::parse("5.pre"), data, std::vector<std::size_t>{0}, metric),
                    Error);

    test::TempDir dir("effects");
    EffectResult r{{{0, 0.5}, {3, -0.25}}, "logitdiff", 7};
    write_effects_csv(r, dir / "e.csv");
    CHECK(slurp(dir / "e.csv") == "latent_id,E,N,metric\n0,0.5,7,logitdiff\n3,-0.25,7,logitdiff\n");
}

namespace {

class FlatScorer final : public PerplexityScorer {
public:
    double perplexity(const TokenSequence&, std::size_t) const override { return 1.0; }
};

class BrokenScorer final : public PerplexityScorer {
public:
    double perplexity(const TokenSequence&, std::size_t) const override { return NAN; }
};

}  // namespace

TEST_CASE("alpha selection picks the best ratio and the smallest alpha on ties") {
    PlantedFixture f;
    SteerSpec spec;
    spec.hook = HookPoint::parse("1.pre");
    spec.latent_id = 2;
    spec.zmax_policy = ZmaxPolicy::fixed_value;
    spec.fixed_zmax = 1.0;
    const std::vector<TokenSequence> prompts{{5, 6, 7}, {8, 9, 10, 11}};
    const std::vector<TokenId> yes{kYes};
    SamplerConfig s;
    const std::vector<double> grid{0.0, 100.0, 200.0};

    const auto sel = select_alpha(f.model, f.sae, prompts, spec, grid, FlatScorer{}, yes, s);
    REQUIRE(sel.scores.size() == 3);
    CHECK(sel.scores[1].positive_rate == 1.0);
    CHECK(sel.scores[2].positive_rate == 1.0);
    CHECK(sel.scores[1].ratio == 1.0);
    CHECK(sel.chosen == 100.0);

    const ModelScorer scorer(f.model);
    const auto real = select_alpha(f.model, f.sae, prompts, spec, default_alpha_grid(), scorer, yes, s);
    CHECK(real.scores.size() == 10);
    for (const auto& sc : real.scores) {
        CHECK(sc.perplexity > 0.0);
        CHECK(sc.ratio == sc.positive_rate / sc.perplexity);
    }

    CHECK_THROWS_AS(select_alpha(f.model, f.sae, prompts, spec, grid, BrokenScorer{}, yes, s), Error);
    CHECK_THROWS_AS(select_alpha(f.model, f.sae, prompts, spec, std::vector<double>{}, scorer, yes, s), Error);
}
