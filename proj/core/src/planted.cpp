// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "saeaudit/planted.hpp"

#include <algorithm>
#include <cmath>

#include "saeaudit/error.hpp"
#include "saeaudit/rng.hpp"

namespace saeaudit {

Vector random_unit_vector(std::size_t dim, std::uint64_t seed) {
    require(dim > 0, ErrorCode::invalid_argument, "unit vector needs a positive dimension");
    Rng rng(seed);
    Vector v(dim);
    double n = 0.0;
    while (n < 1e-6) {
        n = 0.0;
        for (auto& x : v) {
            x = rng.normal();
            n += x * x;
        }
    }
    n = std::sqrt(n);
    for (auto& x : v) x /= n;
    return v;
}

std::vector<double> decoder_cosines(const SaeModel& sae, std::span<const double> direction) {
    require(direction.size() == sae.d_model(), ErrorCode::dimension_mismatch,
            "direction length does not match SAE d_model");
    const double dn = norm(direction);
    require(dn > 0.0, ErrorCode::invalid_argument, "direction must be nonzero");
    std::vector<double> out(sae.width(), 0.0);
    for (std::size_t j = 0; j < sae.width(); ++j) {
        const auto col = sae.dec_weight.column(j);
        const double cn = norm(col);
        out[j] = cn > 0.0 ? dot(col, direction) / (cn * dn) : 0.0;
    }
    return out;
}

std::size_t best_aligned_latent(const SaeModel& sae, std::span<const double> direction) {
    const auto cos = decoder_cosines(sae, direction);
    return static_cast<std::size_t>(std::max_element(cos.begin(), cos.end()) - cos.begin());
}

PlantedModelSpec corpus_planted_spec(const VocabLayout& layout, const CorpusModelConfig& cfg) {
    layout.validate();
    PlantedModelSpec spec;
    spec.concept_directions[kGroupConcept] = random_unit_vector(cfg.d_model, derive_seed(cfg.seed, 101));
    if (cfg.marker_magnitude != 0.0)
        for (TokenId t : layout.markers_a) spec.token_injections[t] = {kGroupConcept, cfg.marker_magnitude};
    if (cfg.condition_magnitude != 0.0)
        for (TokenId t : layout.conditions) spec.token_injections[t] = {kGroupConcept, cfg.condition_magnitude};
    if (cfg.yes_coupling != 0.0) spec.answer_couplings.push_back({kGroupConcept, layout.yes, cfg.yes_coupling});
    return spec;
}

Model build_corpus_model(const VocabLayout& layout, const CorpusModelConfig& cfg) {
    const ModelConfig mc{layout.vocab.size(), cfg.d_model, cfg.n_layers, cfg.n_heads, cfg.d_mlp, cfg.max_seq,
                         cfg.precision};
    if (!cfg.planted) return build_random_model(mc, cfg.seed);
    return build_planted_model(mc, corpus_planted_spec(layout, cfg), cfg.seed);
}

}  // namespace saeaudit
