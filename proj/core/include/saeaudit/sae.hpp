// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "saeaudit/matrix.hpp"
#include "saeaudit/model.hpp"

namespace saeaudit {

enum class SaeActivation { relu, jumprelu };

std::string_view to_string(SaeActivation a);

using LatentVector = std::vector<double>;

// z = act(enc_weight h + enc_bias), h_hat = dec_weight z + dec_bias.
struct SaeModel {
    Matrix enc_weight;  // width x d_model
    Vector enc_bias;    // width
    Matrix dec_weight;  // d_model x width; column j is latent j's direction
    Vector dec_bias;    // d_model
    SaeActivation activation = SaeActivation::relu;
    Vector threshold;  // width, only for jumprelu
    // Residual site the SAE was fit on, when known.
    std::optional<HookPoint> hook;

    std::size_t width() const noexcept { return enc_weight.rows(); }
    std::size_t d_model() const noexcept { return enc_weight.cols(); }

    void validate() const;
};

LatentVector encode(const SaeModel& sae, std::span<const double> h);
// Row-wise encode: n x d_model -> n x width.
Matrix encode_rows(const SaeModel& sae, const Matrix& h);
Vector decode(const SaeModel& sae, std::span<const double> z);

struct SaeTrainConfig {
    double sparsity_weight = 0.0;  // lambda on the l1 norm of z
    double learning_rate = 0.01;
    std::size_t steps = 1000;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;

    void validate() const;
};

struct TrainStats {
    std::vector<double> mse_curve;  // per-step batch reconstruction error
    double final_mse = 0.0;         // over the full training set
    double mean_l0 = 0.0;           // over the full training set
    double r_squared = 0.0;
    std::vector<std::size_t> dead_latents;  // never active on the training set
};

struct SaeGradients {
    Matrix enc_weight;
    Vector enc_bias;
    Matrix dec_weight;
    Vector dec_bias;
};

// Training objective on a batch (rows are samples):
//   mean_b ||h_hat_b - h_b||^2 + lambda * mean_b ||z_b||_1
double sae_loss(const SaeModel& sae, const Matrix& batch, double sparsity_weight);
// Analytic gradient of sae_loss (relu SAEs only).
SaeGradients sae_loss_gradients(const SaeModel& sae, const Matrix& batch, double sparsity_weight);

struct TrainedSae {
    SaeModel sae;
    TrainStats stats;
};

// Plain SGD on relu + l1 with decoder columns renormalized to unit norm
// after every step. Deterministic given cfg.seed.
TrainedSae train_sae(const SaeTrainConfig& cfg, std::size_t width, const Matrix& activations);

// Mean squared reconstruction error per sample, mean L0, and R^2 of `sae` on `data`.
struct ReconstructionReport {
    double mse = 0.0;
    double mean_l0 = 0.0;
    double r_squared = 0.0;
    std::vector<std::size_t> dead_latents;
};
ReconstructionReport evaluate_reconstruction(const SaeModel& sae, const Matrix& data);

void save_sae(const SaeModel& sae, const std::filesystem::path& path);
SaeModel load_sae(const std::filesystem::path& path);

}  // namespace saeaudit
