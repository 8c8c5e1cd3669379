// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "saeaudit/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "saeaudit/error.hpp"
#include "saeaudit/parallel.hpp"
#include "saeaudit/rng.hpp"
#include "saeaudit/tensor_file.hpp"

namespace saeaudit {
namespace {

double sigmoid(double s) {
    if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
    const double e = std::exp(s);
    return e / (1.0 + e);
}

// log(1 + exp(s))
double softplus(double s) { return s > 0.0 ? s + std::log1p(std::exp(-s)) : std::log1p(std::exp(s)); }

void check_labels(const Matrix& features, const LabelVector& labels) {
    require(features.rows() == labels.size(), ErrorCode::dimension_mismatch,
            fmt::format("{} feature rows but {} labels", features.rows(), labels.size()));
    std::size_t pos = 0;
    for (int y : labels) {
        require(y == 0 || y == 1, ErrorCode::invalid_argument, "labels must be 0 or 1");
        pos += static_cast<std::size_t>(y);
    }
    require(pos > 0 && pos < labels.size(), ErrorCode::invalid_argument, "labels must contain both classes");
}

// Largest eigenvalue of A^T A for A = [Z 1], by power iteration.
double augmented_spectral_bound(const Matrix& z, std::uint64_t seed) {
    const std::size_t n = z.rows(), w = z.cols();
    Rng rng(seed);
    Vector v(w + 1);
    for (double& x : v) x = std::abs(rng.normal()) + 0.1;
    double lambda = 0.0;
    Vector av(n);
    for (int it = 0; it < 500; ++it) {
        const double vn = norm(v);
        for (double& x : v) x /= vn;
        for (std::size_t i = 0; i < n; ++i) av[i] = dot(z.row(i), std::span<const double>(v.data(), w)) + v[w];
        Vector next(w + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = z.row(i);
            for (std::size_t j = 0; j < w; ++j) next[j] += row[j] * av[i];
            next[w] += av[i];
        }
        const double estimate = dot(v, next);
        v = std::move(next);
        if (it > 10 && std::abs(estimate - lambda) <= 1e-12 * std::max(1.0, estimate)) {
            lambda = estimate;
            break;
        }
        lambda = estimate;
    }
    return lambda;
}

}  // namespace

Vector max_aggregate(const Matrix& token_latents) {
    require(token_latents.rows() >= 1, ErrorCode::invalid_argument, "max_aggregate needs at least one token");
    Vector out(token_latents.row(0).begin(), token_latents.row(0).end());
    for (std::size_t t = 1; t < token_latents.rows(); ++t) {
        const auto row = token_latents.row(t);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = std::max(out[j], row[j]);
    }
    return out;
}

Matrix document_latents(const Model& model, const SaeModel& sae, HookPoint hook, const TokenSequence& tokens) {
    return encode_rows(sae, model.capture(tokens, hook));
}

FeatureMatrix build_feature_matrix(const Model& model, const SaeModel& sae, HookPoint hook,
                                   std::span<const TokenSequence> documents,
                                   std::span<const std::uint64_t> doc_ids, std::size_t jobs) {
    require(documents.size() == doc_ids.size(), ErrorCode::dimension_mismatch, "documents and doc_ids differ in length");
    FeatureMatrix fm;
    fm.values = Matrix(documents.size(), sae.width());
    fm.doc_ids.assign(doc_ids.begin(), doc_ids.end());
    parallel_for(documents.size(), jobs, [&](std::size_t i) {
        const auto agg = max_aggregate(document_latents(model, sae, hook, documents[i]));
        std::copy(agg.begin(), agg.end(), fm.values.row(i).begin());
    });
    return fm;
}

double ProbeModel::decision(std::span<const double> features) const {
    require(features.size() == weights.size(), ErrorCode::dimension_mismatch, "probe input width mismatch");
    return dot(weights, features) + bias;
}

double soft_threshold(double value, double threshold) {
    if (value > threshold) return value - threshold;
    if (value < -threshold) return value + threshold;
    return 0.0;
}

double probe_objective(const Matrix& features, const LabelVector& labels, std::span<const double> weights,
                       double bias, double lambda_l1) {
    double loss = 0.0;
    for (std::size_t i = 0; i < features.rows(); ++i) {
        const double s = dot(features.row(i), weights) + bias;
        // -log sigma(s) for y = 1, -log(1 - sigma(s)) for y = 0
        loss += labels[i] == 1 ? softplus(-s) : softplus(s);
    }
    loss /= static_cast<double>(features.rows());
    double l1 = 0.0;
    for (double w : weights) l1 += std::abs(w);
    return loss + lambda_l1 * l1;
}

ProbeModel fit_probe(const Matrix& features, const LabelVector& labels, const ProbeFitConfig& cfg) {
    check_labels(features, labels);
    require(std::isfinite(cfg.lambda_l1) && cfg.lambda_l1 >= 0.0, ErrorCode::invalid_argument,
            "lambda_l1 must be finite and >= 0");
    require(all_finite(features.data()), ErrorCode::non_finite, "probe features contain non-finite values");
    require(cfg.max_iter >= 1, ErrorCode::invalid_argument, "max_iter must be >= 1");

    const std::size_t n = features.rows(), w = features.cols();
    const double inv_n = 1.0 / static_cast<double>(n);
    const double pos = std::accumulate(labels.begin(), labels.end(), 0.0);

    ProbeModel probe;
    probe.lambda_l1 = cfg.lambda_l1;
    probe.weights.assign(w, 0.0);
    probe.bias = std::log(pos / (static_cast<double>(n) - pos));

    // 5% headroom over the power-iteration estimate, which approaches the
    // top eigenvalue from below.
    const double lipschitz = 1.05 * augmented_spectral_bound(features, cfg.seed) * inv_n / 4.0;
    const double step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;
    probe.convergence.step_size = step;

    double objective = probe_objective(features, labels, probe.weights, probe.bias, cfg.lambda_l1);
    Vector grad(w);
    for (std::size_t it = 1; it <= cfg.max_iter; ++it) {
        std::fill(grad.begin(), grad.end(), 0.0);
        double grad_b = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = features.row(i);
            const double r = (sigmoid(dot(row, probe.weights) + probe.bias) - labels[i]) * inv_n;
            for (std::size_t j = 0; j < w; ++j) grad[j] += r * row[j];
            grad_b += r;
        }
        for (std::size_t j = 0; j < w; ++j)
            probe.weights[j] = soft_threshold(probe.weights[j] - step * grad[j], step * cfg.lambda_l1);
        probe.bias -= step * grad_b;

        const double next = probe_objective(features, labels, probe.weights, probe.bias, cfg.lambda_l1);
        probe.convergence.iterations = it;
        const double decrease = objective - next;
        objective = next;
        if (decrease < cfg.tol) {
            probe.convergence.converged = true;
            break;
        }
    }
    probe.convergence.final_objective = objective;
    return probe;
}

double probe_accuracy(const ProbeModel& probe, const Matrix& features, const LabelVector& labels) {
    require(features.rows() == labels.size() && !labels.empty(), ErrorCode::dimension_mismatch,
            "accuracy needs one label per feature row");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < features.rows(); ++i) {
        const int pred = probe.decision(features.row(i)) > 0.0 ? 1 : 0;
        correct += pred == labels[i];
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double auroc(std::span<const double> scores, const LabelVector& labels) {
    require(scores.size() == labels.size(), ErrorCode::dimension_mismatch, "auroc: scores and labels differ in length");
    std::size_t n_pos = 0;
    for (int y : labels) {
        require(y == 0 || y == 1, ErrorCode::invalid_argument, "labels must be 0 or 1");
        n_pos += static_cast<std::size_t>(y);
    }
    const std::size_t n_neg = labels.size() - n_pos;
    require(n_pos > 0 && n_neg > 0, ErrorCode::invalid_argument, "auroc needs both classes");
    for (double s : scores) require(!std::isnan(s), ErrorCode::non_finite, "auroc: score is NaN");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Rank-sum with average ranks for ties; ranks are held doubled so every
    // quantity stays an exact integer.
    double doubled_rank_sum = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double doubled_avg_rank = static_cast<double>(i + 1 + j + 1);
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) doubled_rank_sum += doubled_avg_rank;
        i = j + 1;
    }
    const double p = static_cast<double>(n_pos);
    const double doubled_u = doubled_rank_sum - p * (p + 1.0);
    return doubled_u / (2.0 * p * static_cast<double>(n_neg));
}

std::vector<RankedLatent> top_latents(const ProbeModel& probe, std::size_t k) {
    require(k >= 1, ErrorCode::invalid_argument, "top_latents needs k >= 1");
    std::vector<RankedLatent> all(probe.weights.size());
    for (std::size_t j = 0; j < all.size(); ++j) all[j] = {j, probe.weights[j]};
    std::stable_sort(all.begin(), all.end(), [](const RankedLatent& a, const RankedLatent& b) {
        if (a.weight != b.weight) return a.weight > b.weight;
        return a.latent_id < b.latent_id;
    });
    all.resize(std::min(k, all.size()));
    return all;
}

LambdaSelection select_probe_lambda(const Matrix& features, const LabelVector& labels, std::span<const double> grid,
                                    double validation_fraction, const ProbeFitConfig& base) {
    require(!grid.empty(), ErrorCode::invalid_argument, "lambda grid is empty");
    require(validation_fraction > 0.0 && validation_fraction < 1.0, ErrorCode::invalid_argument,
            "validation fraction must be in (0, 1)");
    check_labels(features, labels);

    Rng rng(derive_seed(base.seed, 0x5e1ec7));
    std::vector<std::size_t> fit_rows, val_rows;
    for (int cls = 0; cls <= 1; ++cls) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == cls) rows.push_back(i);
        rng.shuffle(std::span<std::size_t>(rows));
        const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(rows.size())));
        val_rows.insert(val_rows.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_val));
        fit_rows.insert(fit_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_val), rows.end());
    }
    std::sort(fit_rows.begin(), fit_rows.end());
    std::sort(val_rows.begin(), val_rows.end());
    auto gather = [&](const std::vector<std::size_t>& rows, Matrix& z, LabelVector& y) {
        z = Matrix(rows.size(), features.cols());
        y.resize(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto src = features.row(rows[i]);
            std::copy(src.begin(), src.end(), z.row(i).begin());
            y[i] = labels[rows[i]];
        }
    };
    Matrix z_fit, z_val;
    LabelVector y_fit, y_val;
    gather(fit_rows, z_fit, y_fit);
    gather(val_rows, z_val, y_val);
    require(!val_rows.empty(), ErrorCode::invalid_argument, "validation slice is empty");

    LambdaSelection sel;
    sel.grid.assign(grid.begin(), grid.end());
    sel.validation_fraction = validation_fraction;
    double best = -1.0;
    for (double lambda : grid) {
        ProbeFitConfig cfg = base;
        cfg.lambda_l1 = lambda;
        const double acc = probe_accuracy(fit_probe(z_fit, y_fit, cfg), z_val, y_val);
        sel.validation_accuracy.push_back(acc);
        if (acc > best || (acc == best && lambda > sel.chosen)) {
            best = acc;
            sel.chosen = lambda;
        }
    }
    return sel;
}

void save_features(const FeatureMatrix& features, const std::filesystem::path& path) {
    TensorBundle bundle;
    bundle.kind = "features";
    bundle.meta["doc_ids"] = features.doc_ids;
    bundle.tensors.push_back(Tensor::from_matrix("values", features.values));
    write_tensor_file(path, bundle);
}

FeatureMatrix load_features(const std::filesystem::path& path) {
    const auto bundle = read_tensor_file(path, "features");
    FeatureMatrix fm;
    fm.values = bundle.matrix("values");
    try {
        fm.doc_ids = bundle.meta.at("doc_ids").get<std::vector<std::uint64_t>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::format, fmt::format("{}: feature header malformed: {}", path.string(), e.what()));
    }
    require(fm.doc_ids.size() == fm.values.rows(), ErrorCode::format,
            fmt::format("{}: {} doc ids for {} feature rows", path.string(), fm.doc_ids.size(), fm.values.rows()));
    return fm;
}

void save_probe(const ProbeModel& probe, const std::filesystem::path& path) {
    TensorBundle bundle;
    bundle.kind = "probe";
    bundle.meta["lambda_l1"] = probe.lambda_l1;
    bundle.meta["iterations"] = probe.convergence.iterations;
    bundle.meta["final_objective"] = probe.convergence.final_objective;
    bundle.meta["converged"] = probe.convergence.converged;
    bundle.meta["step_size"] = probe.convergence.step_size;
    bundle.tensors.push_back(Tensor::from_vector("weights", probe.weights));
    bundle.tensors.push_back(Tensor::from_vector("bias", {probe.bias}));
    write_tensor_file(path, bundle);
}

ProbeModel load_probe(const std::filesystem::path& path) {
    const auto bundle = read_tensor_file(path, "probe");
    ProbeModel probe;
    probe.weights = bundle.vector("weights");
    const auto bias = bundle.vector("bias");
    require(bias.size() == 1, ErrorCode::format, fmt::format("{}: probe bias must be a single value", path.string()));
    probe.bias = bias[0];
    try {
        probe.lambda_l1 = bundle.meta.at("lambda_l1").get<double>();
        probe.convergence.iterations = bundle.meta.at("iterations").get<std::size_t>();
        probe.convergence.final_objective = bundle.meta.at("final_objective").get<double>();
        probe.convergence.converged = bundle.meta.at("converged").get<bool>();
        probe.convergence.step_size = bundle.meta.at("step_size").get<double>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::format, fmt::format("{}: probe header malformed: {}", path.string(), e.what()));
    }
    return probe;
}

}  // namespace saeaudit
