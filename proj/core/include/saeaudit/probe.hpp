// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "saeaudit/matrix.hpp"
#include "saeaudit/model.hpp"
#include "saeaudit/sae.hpp"

namespace saeaudit {

// N x width matrix of per-document max-aggregated latent activations.
struct FeatureMatrix {
    Matrix values;
    std::vector<std::uint64_t> doc_ids;
};

using LabelVector = std::vector<int>;

// Columnwise maximum over the token rows of an n x width latent matrix.
Vector max_aggregate(const Matrix& token_latents);

// Token-level latents of one document at `hook`.
Matrix document_latents(const Model& model, const SaeModel& sae, HookPoint hook, const TokenSequence& tokens);

// Documents are processed independently on up to `jobs` threads; row order
// follows the input order.
FeatureMatrix build_feature_matrix(const Model& model, const SaeModel& sae, HookPoint hook,
                                   std::span<const TokenSequence> documents,
                                   std::span<const std::uint64_t> doc_ids, std::size_t jobs = 1);

struct ProbeFitConfig {
    double lambda_l1 = 1e-2;
    std::size_t max_iter = 5000;
    double tol = 1e-10;
    std::uint64_t seed = 0;  // seeds the power iteration for the step size
};

struct ConvergenceReport {
    std::size_t iterations = 0;
    double final_objective = 0.0;
    bool converged = false;
    double step_size = 0.0;
};

struct ProbeModel {
    Vector weights;
    double bias = 0.0;
    double lambda_l1 = 0.0;
    ConvergenceReport convergence;

    double decision(std::span<const double> features) const;
};

double soft_threshold(double value, double threshold);

// Mean logistic loss plus lambda * ||w||_1 (bias unpenalized).
double probe_objective(const Matrix& features, const LabelVector& labels, std::span<const double> weights,
                       double bias, double lambda_l1);

// Proximal gradient (ISTA) with fixed step 1/L, L bounding the Lipschitz
// constant of the smooth part via power iteration on [Z 1]^T [Z 1] / (4N).
// Starts from w = 0 and b = log-odds of the label balance.
ProbeModel fit_probe(const Matrix& features, const LabelVector& labels, const ProbeFitConfig& cfg);

double probe_accuracy(const ProbeModel& probe, const Matrix& features, const LabelVector& labels);

// Mann-Whitney AUROC; ties count one half.
double auroc(std::span<const double> scores, const LabelVector& labels);

struct RankedLatent {
    std::size_t latent_id = 0;
    double weight = 0.0;
};

// Sorted by signed weight descending, ties by lower latent id; k clamps to width.
std::vector<RankedLatent> top_latents(const ProbeModel& probe, std::size_t k);

struct LambdaSelection {
    std::vector<double> grid;
    std::vector<double> validation_accuracy;
    double chosen = 0.0;
    double validation_fraction = 0.0;
};

// Holds out a stratified validation slice of the training rows, fits one
// probe per grid value, and picks the best validation accuracy (ties go to
// the larger lambda, i.e. the sparser probe).
LambdaSelection select_probe_lambda(const Matrix& features, const LabelVector& labels, std::span<const double> grid,
                                    double validation_fraction, const ProbeFitConfig& base);

void save_features(const FeatureMatrix& features, const std::filesystem::path& path);
FeatureMatrix load_features(const std::filesystem::path& path);
void save_probe(const ProbeModel& probe, const std::filesystem::path& path);
ProbeModel load_probe(const std::filesystem::path& path);

}  // namespace saeaudit
