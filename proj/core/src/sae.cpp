// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "saeaudit/sae.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "saeaudit/error.hpp"
#include "saeaudit/rng.hpp"
#include "saeaudit/tensor_file.hpp"

namespace saeaudit {
namespace {

void renormalize_decoder(Matrix& dec) {
    for (std::size_t j = 0; j < dec.cols(); ++j) {
        double sq = 0.0;
        for (std::size_t i = 0; i < dec.rows(); ++i) sq += dec(i, j) * dec(i, j);
        const double n = std::sqrt(sq);
        if (n == 0.0) continue;
        for (std::size_t i = 0; i < dec.rows(); ++i) dec(i, j) /= n;
    }
}

// Pre-activations for a batch: B x width.
Matrix pre_activations(const SaeModel& sae, const Matrix& batch) {
    Matrix pre = matmul_transposed(batch, sae.enc_weight);
    add_row_bias(pre, sae.enc_bias);
    return pre;
}

Matrix reconstruct(const SaeModel& sae, const Matrix& z) {
    Matrix out = matmul_transposed(z, sae.dec_weight);
    add_row_bias(out, sae.dec_bias);
    return out;
}

}  // namespace

std::string_view to_string(SaeActivation a) { return a == SaeActivation::relu ? "relu" : "jumprelu"; }

void SaeModel::validate() const {
    const auto w = width(), d = d_model();
    require(w >= 1 && d >= 1, ErrorCode::invalid_argument, "SAE width and d_model must be >= 1");
    require(enc_bias.size() == w, ErrorCode::dimension_mismatch, "SAE enc_bias length != width");
    require(dec_weight.rows() == d && dec_weight.cols() == w, ErrorCode::dimension_mismatch,
            fmt::format("SAE dec_weight is {}x{}, expected {}x{}", dec_weight.rows(), dec_weight.cols(), d, w));
    require(dec_bias.size() == d, ErrorCode::dimension_mismatch, "SAE dec_bias length != d_model");
    if (activation == SaeActivation::jumprelu) {
        require(threshold.size() == w, ErrorCode::dimension_mismatch, "jumprelu threshold length != width");
        for (double t : threshold)
            require(std::isfinite(t) && t >= 0.0, ErrorCode::invalid_argument,
                    "jumprelu thresholds must be finite and >= 0");
    }
}

LatentVector encode(const SaeModel& sae, std::span<const double> h) {
    require(h.size() == sae.d_model(), ErrorCode::dimension_mismatch,
            fmt::format("encode: input has {} entries, SAE expects {}", h.size(), sae.d_model()));
    require(all_finite(h), ErrorCode::non_finite, "encode: input contains non-finite values");
    LatentVector z = matvec(sae.enc_weight, h);
    for (std::size_t j = 0; j < z.size(); ++j) {
        const double pre = z[j] + sae.enc_bias[j];
        if (sae.activation == SaeActivation::relu)
            z[j] = pre > 0.0 ? pre : 0.0;
        else
            z[j] = pre > sae.threshold[j] ? pre : 0.0;
    }
    return z;
}

Matrix encode_rows(const SaeModel& sae, const Matrix& h) {
    Matrix z(h.rows(), sae.width());
    for (std::size_t t = 0; t < h.rows(); ++t) {
        const auto zt = encode(sae, h.row(t));
        std::copy(zt.begin(), zt.end(), z.row(t).begin());
    }
    return z;
}

Vector decode(const SaeModel& sae, std::span<const double> z) {
    require(z.size() == sae.width(), ErrorCode::dimension_mismatch,
            fmt::format("decode: latent vector has {} entries, SAE width is {}", z.size(), sae.width()));
    Vector h = matvec(sae.dec_weight, z);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += sae.dec_bias[i];
    return h;
}

void SaeTrainConfig::validate() const {
    require(std::isfinite(sparsity_weight) && sparsity_weight >= 0.0, ErrorCode::invalid_argument,
            "sparsity weight must be finite and >= 0");
    require(std::isfinite(learning_rate) && learning_rate > 0.0, ErrorCode::invalid_argument,
            "learning rate must be positive");
    require(steps >= 1 && batch_size >= 1, ErrorCode::invalid_argument, "steps and batch_size must be >= 1");
}

double sae_loss(const SaeModel& sae, const Matrix& batch, double sparsity_weight) {
    Matrix pre = pre_activations(sae, batch);
    for (double& v : pre.data()) v = v > 0.0 ? v : 0.0;
    const Matrix recon = reconstruct(sae, pre);
    double sq = 0.0;
    for (std::size_t i = 0; i < recon.size(); ++i) {
        const double e = recon.data()[i] - batch.data()[i];
        sq += e * e;
    }
    double l1 = 0.0;
    for (double z : pre.data()) l1 += z;
    const double b = static_cast<double>(batch.rows());
    return sq / b + sparsity_weight * l1 / b;
}

SaeGradients sae_loss_gradients(const SaeModel& sae, const Matrix& batch, double sparsity_weight) {
    require(sae.activation == SaeActivation::relu, ErrorCode::invalid_argument,
            "gradients are only defined for relu SAEs");
    const std::size_t n = batch.rows(), d = sae.d_model(), w = sae.width();
    const double inv_b = 1.0 / static_cast<double>(n);

    const Matrix pre = pre_activations(sae, batch);
    Matrix z = pre;
    for (double& v : z.data()) v = v > 0.0 ? v : 0.0;
    const Matrix recon = reconstruct(sae, z);

    Matrix g_out(n, d);
    for (std::size_t i = 0; i < g_out.size(); ++i)
        g_out.data()[i] = 2.0 * (recon.data()[i] - batch.data()[i]) * inv_b;

    SaeGradients g;
    g.dec_weight = Matrix(d, w);
    g.dec_bias.assign(d, 0.0);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t i = 0; i < d; ++i) {
            const double go = g_out(b, i);
            g.dec_bias[i] += go;
            for (std::size_t j = 0; j < w; ++j) g.dec_weight(i, j) += go * z(b, j);
        }

    // dL/dpre = (W_dec^T g_out + lambda / B) on active units, 0 elsewhere.
    Matrix g_pre = matmul(g_out, sae.dec_weight);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t j = 0; j < w; ++j)
            g_pre(b, j) = pre(b, j) > 0.0 ? g_pre(b, j) + sparsity_weight * inv_b : 0.0;

    g.enc_weight = matmul(g_pre.transposed(), batch);
    g.enc_bias.assign(w, 0.0);
    for (std::size_t b = 0; b < n; ++b)
        for (std::size_t j = 0; j < w; ++j) g.enc_bias[j] += g_pre(b, j);
    return g;
}

ReconstructionReport evaluate_reconstruction(const SaeModel& sae, const Matrix& data) {
    require(data.rows() >= 1, ErrorCode::invalid_argument, "evaluation data is empty");
    const std::size_t n = data.rows(), d = data.cols();
    Vector mean(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) mean[c] += data(r, c);
    for (double& m : mean) m /= static_cast<double>(n);

    ReconstructionReport rep;
    std::vector<bool> ever_active(sae.width(), false);
    double sse = 0.0, sst = 0.0, l0 = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const auto z = encode(sae, data.row(r));
        const auto h = decode(sae, z);
        for (std::size_t c = 0; c < d; ++c) {
            sse += (h[c] - data(r, c)) * (h[c] - data(r, c));
            sst += (data(r, c) - mean[c]) * (data(r, c) - mean[c]);
        }
        for (std::size_t j = 0; j < z.size(); ++j)
            if (z[j] > 0.0) {
                l0 += 1.0;
                ever_active[j] = true;
            }
    }
    rep.mse = sse / static_cast<double>(n);
    rep.mean_l0 = l0 / static_cast<double>(n);
    rep.r_squared = sst > 0.0 ? 1.0 - sse / sst : (sse == 0.0 ? 1.0 : 0.0);
    for (std::size_t j = 0; j < ever_active.size(); ++j)
        if (!ever_active[j]) rep.dead_latents.push_back(j);
    return rep;
}

TrainedSae train_sae(const SaeTrainConfig& cfg, std::size_t width, const Matrix& activations) {
    cfg.validate();
    require(width >= 1, ErrorCode::invalid_argument, "SAE width must be >= 1");
    require(activations.rows() >= cfg.batch_size, ErrorCode::invalid_argument,
            fmt::format("{} activation rows is fewer than batch size {}", activations.rows(), cfg.batch_size));
    require(all_finite(activations.data()), ErrorCode::non_finite, "training activations contain non-finite values");

    const std::size_t m = activations.rows(), d = activations.cols();
    Rng rng(cfg.seed);

    SaeModel sae;
    sae.activation = SaeActivation::relu;
    sae.dec_weight = Matrix(d, width);
    for (double& v : sae.dec_weight.data()) v = rng.normal();
    renormalize_decoder(sae.dec_weight);
    sae.enc_weight = sae.dec_weight.transposed();
    sae.enc_bias.assign(width, 0.0);
    sae.dec_bias.assign(d, 0.0);
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < d; ++c) sae.dec_bias[c] += activations(r, c);
    for (double& b : sae.dec_bias) b /= static_cast<double>(m);

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(std::span<std::size_t>(order));
    std::size_t cursor = 0;

    TrainStats stats;
    stats.mse_curve.reserve(cfg.steps);
    Matrix batch(cfg.batch_size, d);
    const double lr = cfg.learning_rate;
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        for (std::size_t b = 0; b < cfg.batch_size; ++b) {
            if (cursor == m) {
                rng.shuffle(std::span<std::size_t>(order));
                cursor = 0;
            }
            const auto src = activations.row(order[cursor++]);
            std::copy(src.begin(), src.end(), batch.row(b).begin());
        }
        // Batch MSE is recorded before the update, at the current iterate.
        stats.mse_curve.push_back(sae_loss(sae, batch, 0.0));
        const auto g = sae_loss_gradients(sae, batch, cfg.sparsity_weight);
        for (std::size_t i = 0; i < sae.enc_weight.size(); ++i) sae.enc_weight.data()[i] -= lr * g.enc_weight.data()[i];
        for (std::size_t i = 0; i < sae.enc_bias.size(); ++i) sae.enc_bias[i] -= lr * g.enc_bias[i];
        for (std::size_t i = 0; i < sae.dec_weight.size(); ++i) sae.dec_weight.data()[i] -= lr * g.dec_weight.data()[i];
        for (std::size_t i = 0; i < sae.dec_bias.size(); ++i) sae.dec_bias[i] -= lr * g.dec_bias[i];
        renormalize_decoder(sae.dec_weight);
    }
    require(all_finite(sae.enc_weight.data()) && all_finite(sae.dec_weight.data()), ErrorCode::non_finite,
            "SAE training diverged (non-finite weights); lower the learning rate");

    const auto rep = evaluate_reconstruction(sae, activations);
    stats.final_mse = rep.mse;
    stats.mean_l0 = rep.mean_l0;
    stats.r_squared = rep.r_squared;
    stats.dead_latents = rep.dead_latents;
    return {std::move(sae), std::move(stats)};
}

void save_sae(const SaeModel& sae, const std::filesystem::path& path) {
    sae.validate();
    TensorBundle bundle;
    bundle.kind = "sae";
    bundle.meta["width"] = sae.width();
    bundle.meta["d_model"] = sae.d_model();
    bundle.meta["activation"] = to_string(sae.activation);
    bundle.meta["hook"] = sae.hook ? nlohmann::json(sae.hook->to_string()) : nlohmann::json(nullptr);
    bundle.tensors.push_back(Tensor::from_matrix("enc_weight", sae.enc_weight));
    bundle.tensors.push_back(Tensor::from_vector("enc_bias", sae.enc_bias));
    bundle.tensors.push_back(Tensor::from_matrix("dec_weight", sae.dec_weight));
    bundle.tensors.push_back(Tensor::from_vector("dec_bias", sae.dec_bias));
    if (sae.activation == SaeActivation::jumprelu)
        bundle.tensors.push_back(Tensor::from_vector("threshold", sae.threshold));
    write_tensor_file(path, bundle);
}

SaeModel load_sae(const std::filesystem::path& path) {
    const auto bundle = read_tensor_file(path, "sae");
    SaeModel sae;
    std::size_t width = 0, d_model = 0;
    try {
        width = bundle.meta.at("width").get<std::size_t>();
        d_model = bundle.meta.at("d_model").get<std::size_t>();
        const auto act = bundle.meta.at("activation").get<std::string>();
        if (act == "relu")
            sae.activation = SaeActivation::relu;
        else if (act == "jumprelu")
            sae.activation = SaeActivation::jumprelu;
        else
            fail(ErrorCode::format, fmt::format("{}: unknown SAE activation '{}'", path.string(), act));
        if (bundle.meta.contains("hook") && !bundle.meta.at("hook").is_null())
            sae.hook = HookPoint::parse(bundle.meta.at("hook").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::format, fmt::format("{}: SAE header malformed: {}", path.string(), e.what()));
    }
    sae.enc_weight = bundle.matrix("enc_weight");
    sae.enc_bias = bundle.vector("enc_bias");
    sae.dec_weight = bundle.matrix("dec_weight");
    sae.dec_bias = bundle.vector("dec_bias");
    if (sae.activation == SaeActivation::jumprelu) sae.threshold = bundle.vector("threshold");
    require(sae.width() == width && sae.d_model() == d_model, ErrorCode::format,
            fmt::format("{}: header declares width {} / d_model {}, tensors are {}x{}", path.string(), width,
                        d_model, sae.width(), sae.d_model()));
    try {
        sae.validate();
    } catch (const Error& e) {
        fail(ErrorCode::format, fmt::format("{}: {}", path.string(), e.what()));
    }
    return sae;
}

}  // namespace saeaudit
