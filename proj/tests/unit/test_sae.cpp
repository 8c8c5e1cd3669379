// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <functional>

#include "helpers.hpp"
#include "saeaudit/error.hpp"
#include "saeaudit/sae.hpp"
#include "saeaudit/tensor_file.hpp"

using namespace saeaudit;

namespace {

SaeModel tiny_sae() {
    SaeModel sae;
    sae.enc_weight = Matrix(2, 3, {1, 0, 0, 0, 1, -1});
    sae.enc_bias = {0.0, -0.5};
    sae.dec_weight = Matrix(3, 2, {1, 0, 0, 2, 0, -1});
    sae.dec_bias = {0.1, 0.2, 0.3};
    return sae;
}

double relative_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

TEST_CASE("encode and decode by hand") {
    const auto sae = tiny_sae();
    CHECK(encode(sae, Vector{2.0, 1.0, 0.0}) == Vector{2.0, 0.5});
    CHECK(encode(sae, Vector{-1.0, 0.0, 1.0}) == Vector{0.0, 0.0});
    CHECK(decode(sae, Vector{2.0, 0.5}) == Vector{2.1, 1.2, -0.2});
    CHECK_THROWS_AS(encode(sae, Vector{1.0, 2.0}), Error);
    CHECK_THROWS_AS(decode(sae, Vector{1.0}), Error);
    CHECK_THROWS_AS(encode(sae, Vector{NAN, 0.0, 0.0}), Error);
}

TEST_CASE("jumprelu keeps pre-activations strictly above the threshold") {
    auto sae = tiny_sae();
    sae.activation = SaeActivation::jumprelu;
    sae.threshold = {1.0, 0.0};
    CHECK(encode(sae, Vector{1.0, 1.0, 0.0}) == Vector{0.0, 0.5});
    CHECK(encode(sae, Vector{1.5, 0.0, 0.0}) == Vector{1.5, 0.0});
    sae.threshold = {1.0};
    CHECK_THROWS_AS(sae.validate(), Error);
}

TEST_CASE("encode_rows matches per-row encode") {
    Rng rng(1);
    const auto sae = test::random_sae(6, 4, rng);
    const auto h = test::random_matrix(5, 4, rng);
    const auto z = encode_rows(sae, h);
    for (std::size_t t = 0; t < 5; ++t) {
        const auto zt = encode(sae, h.row(t));
        for (std::size_t j = 0; j < 6; ++j) CHECK(z(t, j) == zt[j]);
    }
}

TEST_CASE("loss by hand") {
    const auto sae = tiny_sae();
    const Matrix batch(1, 3, {2.0, 1.0, 0.0});
    // z = (2, 0.5), x_hat = (2.1, 1.2, -0.2), squared error 0.01 + 0.04 + 0.04
    CHECK(sae_loss(sae, batch, 0.0) == doctest::Approx(0.09).epsilon(1e-12));
    CHECK(sae_loss(sae, batch, 0.1) == doctest::Approx(0.09 + 0.25).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(2024);
    auto sae = test::random_sae(5, 3, rng, 0.2);
    const auto batch = test::random_matrix(4, 3, rng);
    // Stay clear of relu kinks so the finite difference is well defined.
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t j = 0; j < 5; ++j) {
            double pre = sae.enc_bias[j];
            for (std::size_t i = 0; i < 3; ++i) pre += sae.enc_weight(j, i) * batch(r, i);
            REQUIRE(std::abs(pre) > 1e-3);
        }
    const double lambda = 0.3, step = 1e-5;
    const auto grads = sae_loss_gradients(sae, batch, lambda);

    const auto check = [&](std::vector<double>& params, const std::vector<double>& analytic) {
        for (std::size_t k = 0; k < params.size(); ++k) {
            const double saved = params[k];
            params[k] = saved + step;
            const double up = sae_loss(sae, batch, lambda);
            params[k] = saved - step;
            const double down = sae_loss(sae, batch, lambda);
            params[k] = saved;
            const double numeric = (up - down) / (2 * step);
            CHECK(relative_error(analytic[k], numeric) < 1e-4);
        }
    };
    check(sae.enc_weight.data(), grads.enc_weight.data());
    check(sae.enc_bias, grads.enc_bias);
    check(sae.dec_weight.data(), grads.dec_weight.data());
    check(sae.dec_bias, grads.dec_bias);
}

TEST_CASE("training on rank-4 data is sparse, accurate and deterministic") {
    const auto data = test::rank4_activations(2000, 16, 7);
    SaeTrainConfig cfg;
    cfg.sparsity_weight = 0.5;
    cfg.learning_rate = 0.02;
    cfg.steps = 3000;
    cfg.batch_size = 64;
    cfg.seed = 1;
    const auto a = train_sae(cfg, 64, data);
    CHECK(a.stats.r_squared >= 0.9);
    CHECK(a.stats.mean_l0 <= 8.0);
    CHECK(a.stats.mse_curve.size() == 3000);
    // Decoder columns are kept at unit norm.
    for (std::size_t j = 0; j < 64; ++j) CHECK(norm(a.sae.dec_weight.column(j)) == doctest::Approx(1.0).epsilon(1e-12));
    const auto again = train_sae(cfg, 64, data);
    CHECK(again.sae.enc_weight == a.sae.enc_weight);
    CHECK(again.stats.mse_curve == a.stats.mse_curve);
    const auto report = evaluate_reconstruction(a.sae, data);
    CHECK(report.r_squared == a.stats.r_squared);
    CHECK(report.mean_l0 == a.stats.mean_l0);
}

TEST_CASE("training rejects bad configurations") {
    const auto data = test::rank4_activations(10, 4, 1);
    SaeTrainConfig cfg;
    cfg.learning_rate = 0.0;
    CHECK_THROWS_AS(train_sae(cfg, 4, data), Error);
    cfg = SaeTrainConfig{};
    cfg.sparsity_weight = -1.0;
    CHECK_THROWS_AS(train_sae(cfg, 4, data), Error);
    CHECK_THROWS_AS(train_sae(SaeTrainConfig{}, 0, data), Error);
    CHECK_THROWS_AS(train_sae(SaeTrainConfig{}, 4, Matrix(0, 4)), Error);
}

TEST_CASE("save and load round-trip, header must match tensors") {
    test::TempDir dir("sae");
    Rng rng(3);
    auto sae = test::random_sae(6, 4, rng);
    sae.hook = HookPoint{1, HookSite::residual_pre};
    save_sae(sae, dir / "s.bin");
    const auto back = load_sae(dir / "s.bin");
    CHECK(back.enc_weight == sae.enc_weight);
    CHECK(back.dec_weight == sae.dec_weight);
    CHECK(back.enc_bias == sae.enc_bias);
    CHECK(back.dec_bias == sae.dec_bias);
    REQUIRE(back.hook.has_value());
    CHECK(*back.hook == *sae.hook);

    auto bundle = read_tensor_file(dir / "s.bin");
    bundle.meta["width"] = 7;
    write_tensor_file(dir / "bad.bin", bundle);
    CHECK_THROWS_AS(load_sae(dir / "bad.bin"), Error);
}
