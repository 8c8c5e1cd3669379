// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "saeaudit/intervene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "saeaudit/error.hpp"
#include "saeaudit/parallel.hpp"
#include "saeaudit/rng.hpp"

namespace saeaudit {
namespace {

// Re-inserts edited latents. In error-preserving mode only the latents that
// actually changed touch the residual: h'_t = h_t + sum_j (z'_tj - z_tj) d_j.
ResidualActivations splice_latents(const SaeModel& sae, const ResidualActivations& h, const Matrix& z,
                                   const Matrix& z_new, SpliceMode mode) {
    ResidualActivations out = h;
    const std::size_t d = sae.d_model();
    for (std::size_t t = 0; t < h.rows(); ++t) {
        auto row = out.row(t);
        if (mode == SpliceMode::raw) {
            const auto decoded = decode(sae, z_new.row(t));
            std::copy(decoded.begin(), decoded.end(), row.begin());
            continue;
        }
        for (std::size_t j = 0; j < sae.width(); ++j) {
            const double delta = z_new(t, j) - z(t, j);
            if (z_new(t, j) == z(t, j)) continue;
            for (std::size_t i = 0; i < d; ++i) row[i] += delta * sae.dec_weight(i, j);
        }
    }
    return out;
}

void check_residual(const SaeModel& sae, const ResidualActivations& h) {
    require(h.cols() == sae.d_model(), ErrorCode::dimension_mismatch,
            fmt::format("residual width {} does not match SAE d_model {}", h.cols(), sae.d_model()));
}

}  // namespace

std::string_view to_string(SpliceMode m) { return m == SpliceMode::raw ? "raw" : "error_preserving"; }
std::string_view to_string(ZmaxPolicy p) {
    return p == ZmaxPolicy::fixed_value ? "fixed_value" : "per_input_global_max";
}

void SteerSpec::validate(std::size_t width) const {
    require(latent_id < width, ErrorCode::out_of_range,
            fmt::format("steering latent {} outside SAE width {}", latent_id, width));
    require(std::isfinite(alpha) && alpha >= 0.0, ErrorCode::invalid_argument, "steering alpha must be >= 0");
    if (zmax_policy == ZmaxPolicy::fixed_value)
        require(std::isfinite(fixed_zmax) && fixed_zmax > 0.0, ErrorCode::invalid_argument,
                "fixed z_max must be > 0");
}

void AblationSpec::validate(std::size_t width) const {
    require(!hooks.empty(), ErrorCode::invalid_argument, "ablation needs at least one hook");
    require(!latent_ids.empty(), ErrorCode::invalid_argument, "ablation needs at least one latent");
    std::set<HookPoint> seen(hooks.begin(), hooks.end());
    require(seen.size() == hooks.size(), ErrorCode::invalid_argument, "ablation hooks must be distinct");
    for (auto id : latent_ids)
        require(id < width, ErrorCode::out_of_range, fmt::format("ablated latent {} outside SAE width {}", id, width));
}

LatentVector steer_vector(LatentVector z, std::size_t r, double alpha, double z_max) {
    require(r < z.size(), ErrorCode::out_of_range, fmt::format("steering index {} outside width {}", r, z.size()));
    require(z_max >= 0.0, ErrorCode::invalid_argument, "z_max must be >= 0");
    z[r] += alpha * z_max;
    return z;
}

double global_zmax(const Matrix& latents) {
    double mx = 0.0;
    for (double v : latents.data()) mx = std::max(mx, v);
    return mx;
}

ResidualActivations splice(const SaeModel& sae, const ResidualActivations& h, const LatentTransform& transform,
                           SpliceMode mode) {
    check_residual(sae, h);
    const Matrix z = encode_rows(sae, h);
    Matrix z_new = z;
    transform(z_new);
    require(z_new.rows() == z.rows() && z_new.cols() == z.cols(), ErrorCode::dimension_mismatch,
            "latent transform changed the latent matrix shape");
    return splice_latents(sae, h, z, z_new, mode);
}

ResidualEdit steering_edit(const SaeModel& sae, const SteerSpec& spec, std::size_t prompt_length) {
    spec.validate(sae.width());
    return ResidualEdit{spec.hook, [&sae, spec, prompt_length](const Matrix& h) {
                            check_residual(sae, h);
                            const Matrix z = encode_rows(sae, h);
                            const double z_max =
                                spec.zmax_policy == ZmaxPolicy::fixed_value ? spec.fixed_zmax : global_zmax(z);
                            Matrix z_new = z;
                            const std::size_t rows = spec.prompt_only ? std::min(prompt_length, z.rows()) : z.rows();
                            for (std::size_t t = 0; t < rows; ++t) {
                                // Same arithmetic as steer_vector, applied row-wise.
                                z_new(t, spec.latent_id) += spec.alpha * z_max;
                            }
                            return splice_latents(sae, h, z, z_new, spec.splice_mode);
                        }};
}

std::vector<ResidualEdit> ablation_edits(const SaeModel& sae, const AblationSpec& spec) {
    spec.validate(sae.width());
    std::vector<ResidualEdit> edits;
    for (const auto& hook : spec.hooks) {
        edits.push_back(ResidualEdit{hook, [&sae, ids = spec.latent_ids, mode = spec.splice_mode](const Matrix& h) {
                                         check_residual(sae, h);
                                         const Matrix z = encode_rows(sae, h);
                                         Matrix z_new = z;
                                         for (std::size_t t = 0; t < z.rows(); ++t)
                                             for (auto id : ids) z_new(t, id) = 0.0;
                                         return splice_latents(sae, h, z, z_new, mode);
                                     }});
    }
    return edits;
}

LogitMatrix apply_steering(const Model& model, const SaeModel& sae, const TokenSequence& tokens,
                           const SteerSpec& spec) {
    const ResidualEdit edit = steering_edit(sae, spec, tokens.size());
    return model.forward_with_intervention(tokens, std::span(&edit, 1));
}

TokenSequence generate_steered(const Model& model, const SaeModel& sae, const TokenSequence& prompt,
                               const SteerSpec& spec, const SamplerConfig& sampler) {
    const ResidualEdit edit = steering_edit(sae, spec, prompt.size());
    return model.generate(prompt, sampler, std::span(&edit, 1));
}

LogitMatrix zero_ablate(const Model& model, const SaeModel& sae, const TokenSequence& tokens,
                        const AblationSpec& spec) {
    const auto edits = ablation_edits(sae, spec);
    return model.forward_with_intervention(tokens, edits);
}

EffectResult latent_effect(const Model& model, const SaeModel& sae, HookPoint hook,
                           std::span<const TokenSequence> dataset, std::span<const std::size_t> latent_ids,
                           const AnswerMetric& metric, std::size_t jobs) {
    require(!dataset.empty(), ErrorCode::invalid_argument, "effect estimation needs a nonempty dataset");
    model.validate_hook(hook);
    for (auto id : latent_ids)
        require(id < sae.width(), ErrorCode::out_of_range, fmt::format("latent {} outside SAE width {}", id, sae.width()));

    std::vector<double> clean(dataset.size());
    std::vector<Matrix> latents(dataset.size());
    parallel_for(dataset.size(), jobs, [&](std::size_t i) {
        clean[i] = metric(model.forward(dataset[i]));
        latents[i] = encode_rows(sae, model.capture(dataset[i], hook));
    });

    struct Cell {
        std::size_t input, latent_index, position;
        double delta = 0.0;
    };
    std::vector<Cell> cells;
    for (std::size_t i = 0; i < dataset.size(); ++i)
        for (std::size_t k = 0; k < latent_ids.size(); ++k)
            for (std::size_t t = 0; t < dataset[i].size(); ++t)
                if (latents[i](t, latent_ids[k]) != 0.0) cells.push_back({i, k, t});

    parallel_for(cells.size(), jobs, [&](std::size_t c) {
        Cell& cell = cells[c];
        const std::size_t latent = latent_ids[cell.latent_index];
        const std::size_t position = cell.position;
        const ResidualEdit edit{hook, [&sae, latent, position](const Matrix& h) {
                                    return splice(sae, h, [latent, position](Matrix& z) { z(position, latent) = 0.0; });
                                }};
        cell.delta = metric(model.forward_with_intervention(dataset[cell.input], std::span(&edit, 1))) -
                     clean[cell.input];
    });

    // Deterministic reduction: per latent, per input (in order), positions in order.
    std::vector<std::vector<double>> per_input(latent_ids.size(), std::vector<double>(dataset.size(), 0.0));
    for (const auto& cell : cells) per_input[cell.latent_index][cell.input] += cell.delta;

    EffectResult result;
    result.metric_name = metric.name();
    result.dataset_size = dataset.size();
    for (std::size_t k = 0; k < latent_ids.size(); ++k) {
        double total = 0.0;
        for (double v : per_input[k]) total += v;
        result.per_latent[latent_ids[k]] = total / static_cast<double>(dataset.size());
    }
    return result;
}

void write_effects_csv(const EffectResult& effects, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    require(out.good(), ErrorCode::io, fmt::format("cannot open '{}' for writing", path.string()));
    out << "latent_id,E,N,metric\n";
    for (const auto& [id, e] : effects.per_latent)
        out << fmt::format("{},{:.17g},{},{}\n", id, e, effects.dataset_size, effects.metric_name);
}

double ModelScorer::perplexity(const TokenSequence& tokens, std::size_t first_scored) const {
    return saeaudit::perplexity(model_, tokens, first_scored);
}

std::vector<double> default_alpha_grid() { return {0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0}; }

AlphaSelection select_alpha(const Model& model, const SaeModel& sae, std::span<const TokenSequence> prompts,
                            const SteerSpec& spec_template, std::span<const double> grid,
                            const PerplexityScorer& scorer, std::span<const TokenId> positive_tokens,
                            const SamplerConfig& sampler) {
    require(!grid.empty(), ErrorCode::invalid_argument, "alpha grid is empty");
    require(!prompts.empty(), ErrorCode::invalid_argument, "alpha selection needs at least one prompt");
    AlphaSelection sel;
    bool have_best = false;
    AlphaScore best;
    for (double alpha : grid) {
        SteerSpec spec = spec_template;
        spec.alpha = alpha;
        std::vector<TokenSequence> generations;
        double ppl_total = 0.0;
        for (std::size_t p = 0; p < prompts.size(); ++p) {
            SamplerConfig s = sampler;
            s.seed = derive_seed(sampler.seed, p);
            auto gen = generate_steered(model, sae, prompts[p], spec, s);
            TokenSequence full = prompts[p];
            full.insert(full.end(), gen.begin(), gen.end());
            const double ppl = scorer.perplexity(full, prompts[p].size());
            require(std::isfinite(ppl) && ppl > 0.0, ErrorCode::degenerate,
                    fmt::format("scorer returned degenerate perplexity {} at alpha {}", ppl, alpha));
            ppl_total += ppl;
            generations.push_back(std::move(gen));
        }
        AlphaScore score;
        score.alpha = alpha;
        score.positive_rate = positive_rate(generations, positive_tokens);
        score.perplexity = ppl_total / static_cast<double>(prompts.size());
        score.ratio = score.positive_rate / score.perplexity;
        sel.scores.push_back(score);
        if (!have_best || score.ratio > best.ratio || (score.ratio == best.ratio && alpha < best.alpha)) {
            best = score;
            have_best = true;
        }
    }
    sel.chosen = best.alpha;
    return sel;
}

}  // namespace saeaudit
