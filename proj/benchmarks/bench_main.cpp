// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "helpers.hpp"
#include "saeaudit/intervene.hpp"
#include "saeaudit/metrics.hpp"
#include "saeaudit/probe.hpp"

using namespace saeaudit;

namespace {

ModelConfig bench_config(Precision p = Precision::fp64) { return ModelConfig{64, 32, 2, 4, 64, 64, p}; }

void BM_Forward(benchmark::State& state) {
    const auto precision = state.range(1) ? Precision::fp32 : Precision::fp64;
    const auto model = build_random_model(bench_config(precision), 1);
    Rng rng(2);
    const auto x = test::random_tokens(static_cast<std::size_t>(state.range(0)), 64, rng);
    for (auto _ : state) benchmark::DoNotOptimize(model.forward(x));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->ArgsProduct({{8, 32, 64}, {0, 1}});

void BM_SaeEncode(benchmark::State& state) {
    Rng rng(3);
    const auto width = static_cast<std::size_t>(state.range(0));
    const auto sae = test::random_sae(width, 32, rng);
    const auto h = test::random_matrix(64, 32, rng);
    for (auto _ : state) benchmark::DoNotOptimize(encode_rows(sae, h));
    state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_SaeEncode)->Arg(64)->Arg(256)->Arg(1024);

void BM_LatentEffect(benchmark::State& state) {
    const auto model = build_random_model(bench_config(), 4);
    Rng rng(5);
    const auto sae = test::random_sae(64, 32, rng);
    std::vector<TokenSequence> data;
    for (int i = 0; i < 4; ++i) data.push_back(test::random_tokens(12, 64, rng));
    std::vector<std::size_t> ids(64);
    for (std::size_t j = 0; j < ids.size(); ++j) ids[j] = j;
    const AnswerMetric metric{1, 2};
    const auto jobs = static_cast<std::size_t>(state.range(0));
    for (auto _ : state)
        benchmark::DoNotOptimize(latent_effect(model, sae, HookPoint{1, HookSite::residual_pre}, data, ids, metric, jobs));
}
BENCHMARK(BM_LatentEffect)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_FeatureMatrix(benchmark::State& state) {
    const auto model = build_random_model(bench_config(), 6);
    Rng rng(7);
    const auto sae = test::random_sae(64, 32, rng);
    std::vector<TokenSequence> docs;
    std::vector<std::uint64_t> ids;
    for (std::uint64_t i = 0; i < 100; ++i) {
        docs.push_back(test::random_tokens(16, 64, rng));
        ids.push_back(i);
    }
    for (auto _ : state)
        benchmark::DoNotOptimize(build_feature_matrix(model, sae, HookPoint{1, HookSite::residual_pre}, docs, ids));
}
BENCHMARK(BM_FeatureMatrix)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
