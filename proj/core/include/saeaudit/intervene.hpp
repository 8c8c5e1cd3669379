// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "saeaudit/metrics.hpp"
#include "saeaudit/model.hpp"
#include "saeaudit/sae.hpp"

namespace saeaudit {

// error_preserving: h' = decode(z') + (h - decode(z)), so an unchanged z
// leaves h bit-identical. raw: h' = decode(z'), dropping the SAE error term.
enum class SpliceMode { error_preserving, raw };

enum class ZmaxPolicy {
    per_input_global_max,  // max over all latents and positions of this input's clean encoding
    fixed_value,
};

std::string_view to_string(SpliceMode m);
std::string_view to_string(ZmaxPolicy p);

struct SteerSpec {
    HookPoint hook;
    std::size_t latent_id = 0;
    double alpha = 0.0;
    ZmaxPolicy zmax_policy = ZmaxPolicy::per_input_global_max;
    double fixed_zmax = 0.0;
    bool prompt_only = false;  // steer prompt positions only (default: every position)
    SpliceMode splice_mode = SpliceMode::error_preserving;

    void validate(std::size_t width) const;
};

enum class AblationMode { zero };

struct AblationSpec {
    std::vector<HookPoint> hooks;
    std::vector<std::size_t> latent_ids;
    AblationMode mode = AblationMode::zero;
    SpliceMode splice_mode = SpliceMode::error_preserving;

    void validate(std::size_t width) const;
};

// z' = z + 1[i = r] * alpha * z_max
LatentVector steer_vector(LatentVector z, std::size_t r, double alpha, double z_max);

// Mutates an n_tokens x width latent matrix in place.
using LatentTransform = std::function<void(Matrix& latents)>;

// Per token: z = encode(h_t), z' = transform(z), then re-insert per `mode`.
ResidualActivations splice(const SaeModel& sae, const ResidualActivations& h, const LatentTransform& transform,
                           SpliceMode mode = SpliceMode::error_preserving);

double global_zmax(const Matrix& latents);

// Residual edits implementing a steering or ablation spec; useful when
// several interventions have to share one forward pass.
ResidualEdit steering_edit(const SaeModel& sae, const SteerSpec& spec, std::size_t prompt_length);
std::vector<ResidualEdit> ablation_edits(const SaeModel& sae, const AblationSpec& spec);

LogitMatrix apply_steering(const Model& model, const SaeModel& sae, const TokenSequence& tokens,
                           const SteerSpec& spec);
// Steered generation; z_max and the splice are recomputed at every step over
// the current sequence.
TokenSequence generate_steered(const Model& model, const SaeModel& sae, const TokenSequence& prompt,
                               const SteerSpec& spec, const SamplerConfig& sampler);

LogitMatrix zero_ablate(const Model& model, const SaeModel& sae, const TokenSequence& tokens,
                        const AblationSpec& spec);

struct EffectResult {
    std::map<std::size_t, double> per_latent;
    std::string metric_name;
    std::size_t dataset_size = 0;
};

// E_j = mean over inputs x of sum_t [ m(x | do(z_{t,j} = 0)) - m(x) ], computed
// exactly with one intervened forward pass per active (input, position,
// latent) cell. Inactive cells contribute exactly zero under the
// error-preserving splice and are skipped.
EffectResult latent_effect(const Model& model, const SaeModel& sae, HookPoint hook,
                           std::span<const TokenSequence> dataset, std::span<const std::size_t> latent_ids,
                           const AnswerMetric& metric, std::size_t jobs = 1);

void write_effects_csv(const EffectResult& effects, const std::filesystem::path& path);

class PerplexityScorer {
public:
    virtual ~PerplexityScorer() = default;
    virtual double perplexity(const TokenSequence& tokens, std::size_t first_scored) const = 0;
};

class ModelScorer final : public PerplexityScorer {
public:
    explicit ModelScorer(const Model& model) : model_(model) {}
    double perplexity(const TokenSequence& tokens, std::size_t first_scored) const override;

private:
    const Model& model_;
};

struct AlphaScore {
    double alpha = 0.0;
    double positive_rate = 0.0;
    double perplexity = 0.0;
    double ratio = 0.0;
};

struct AlphaSelection {
    std::vector<AlphaScore> scores;
    double chosen = 0.0;
};

// Ten points spanning [0.01, 5].
std::vector<double> default_alpha_grid();

// For each alpha: steer-generate every prompt, take the positive rate (first
// generated token in `positive_tokens`) and the mean perplexity of the
// continuations under `scorer`. Picks the alpha maximizing rate / perplexity;
// ties go to the smallest alpha.
AlphaSelection select_alpha(const Model& model, const SaeModel& sae, std::span<const TokenSequence> prompts,
                            const SteerSpec& spec_template, std::span<const double> grid,
                            const PerplexityScorer& scorer, std::span<const TokenId> positive_tokens,
                            const SamplerConfig& sampler);

}  // namespace saeaudit
