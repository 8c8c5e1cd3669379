// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "saeaudit/corpus.hpp"
#include "saeaudit/model.hpp"
#include "saeaudit/sae.hpp"

namespace saeaudit {

inline const std::string kGroupConcept = "group_a";

// A model over a corpus vocabulary. When planted, group-A markers (and
// optionally condition tokens) inject the group concept and the concept
// pushes the Yes logit with strength yes_coupling; group-B markers inject
// nothing.
struct CorpusModelConfig {
    std::size_t d_model = 32;
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    std::size_t d_mlp = 64;
    std::size_t max_seq = 64;
    Precision precision = Precision::fp64;
    bool planted = true;
    double marker_magnitude = 6.0;
    double condition_magnitude = 0.0;
    double yes_coupling = 0.0;
    std::uint64_t seed = 0;
};

// Unit vector drawn from N(0, I) and normalized.
Vector random_unit_vector(std::size_t dim, std::uint64_t seed);

// Cosine between `direction` and each decoder column; the argmax latent is
// the SAE's best match for a planted concept (ties go to the lower id).
std::vector<double> decoder_cosines(const SaeModel& sae, std::span<const double> direction);
std::size_t best_aligned_latent(const SaeModel& sae, std::span<const double> direction);

PlantedModelSpec corpus_planted_spec(const VocabLayout& layout, const CorpusModelConfig& cfg);
Model build_corpus_model(const VocabLayout& layout, const CorpusModelConfig& cfg);

}  // namespace saeaudit
