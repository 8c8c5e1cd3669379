// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "saeaudit/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "saeaudit/error.hpp"
#include "saeaudit/rng.hpp"
#include "saeaudit/tensor_file.hpp"

namespace saeaudit {
namespace {

constexpr double kLayerNormEps = 1e-5;

void layer_norm_rows(Matrix& x, std::span<const double> gain, std::span<const double> bias) {
    const double d = static_cast<double>(x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto row = x.row(r);
        double mean = 0.0;
        for (double v : row) mean += v;
        mean /= d;
        double var = 0.0;
        for (double v : row) var += (v - mean) * (v - mean);
        var /= d;
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - mean) * inv * gain[c] + bias[c];
    }
}

double gelu(double x) {
    constexpr double k = 0.7978845608028654;  // sqrt(2 / pi)
    return 0.5 * x * (1.0 + std::tanh(k * (x + 0.044715 * x * x * x)));
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = rng.normal(0.0, stddev);
    return m;
}

// v <- v - sum_k (q_k . v) q_k
void project_out(std::span<double> v, const Matrix& basis) {
    for (std::size_t k = 0; k < basis.rows(); ++k) {
        const auto q = basis.row(k);
        const double coef = dot(q, v);
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= coef * q[i];
    }
}

void project_out_columns(Matrix& m, const Matrix& basis) {
    Vector col(m.rows());
    for (std::size_t c = 0; c < m.cols(); ++c) {
        for (std::size_t r = 0; r < m.rows(); ++r) col[r] = m(r, c);
        project_out(col, basis);
        for (std::size_t r = 0; r < m.rows(); ++r) m(r, c) = col[r];
    }
}

void round_weights(ModelWeights& w) {
    auto r = [](auto& x) {
        if constexpr (std::is_same_v<std::decay_t<decltype(x)>, Matrix>)
            round_to_float(x.data());
        else
            round_to_float(x);
    };
    r(w.token_embed);
    r(w.positional);
    r(w.unembed);
    r(w.unembed_bias);
    for (auto& b : w.blocks) {
        r(b.ln1_gain), r(b.ln1_bias), r(b.w_q), r(b.w_k), r(b.w_v), r(b.w_o), r(b.b_o);
        r(b.ln2_gain), r(b.ln2_bias), r(b.w_in), r(b.b_in), r(b.w_out), r(b.b_out);
    }
}

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* name) {
    require(m.rows() == rows && m.cols() == cols, ErrorCode::dimension_mismatch,
            fmt::format("weight '{}' is {}x{}, expected {}x{}", name, m.rows(), m.cols(), rows, cols));
}

void expect_len(const Vector& v, std::size_t n, const char* name) {
    require(v.size() == n, ErrorCode::dimension_mismatch,
            fmt::format("weight '{}' has length {}, expected {}", name, v.size(), n));
}

}  // namespace

std::string_view to_string(Precision p) { return p == Precision::fp32 ? "fp32" : "fp64"; }

Precision parse_precision(std::string_view text) {
    if (text == "fp32") return Precision::fp32;
    if (text == "fp64") return Precision::fp64;
    fail(ErrorCode::invalid_argument, fmt::format("unknown precision '{}' (expected fp32 or fp64)", text));
}

void ModelConfig::validate() const {
    require(vocab_size >= 1 && d_model >= 1 && n_layers >= 1 && n_heads >= 1 && d_mlp >= 1 && max_seq >= 1,
            ErrorCode::invalid_argument, "model config counts must all be >= 1");
    require(d_model % n_heads == 0, ErrorCode::invalid_argument,
            fmt::format("d_model {} is not divisible by n_heads {}", d_model, n_heads));
}

std::string HookPoint::to_string() const {
    return fmt::format("{}.{}", layer, site == HookSite::residual_pre ? "pre" : "post");
}

HookPoint HookPoint::parse(std::string_view text) {
    const auto dot_pos = text.find('.');
    require(dot_pos != std::string_view::npos, ErrorCode::invalid_argument,
            fmt::format("hook '{}' must look like '<layer>.pre' or '<layer>.post'", text));
    HookPoint hook;
    const auto layer_text = text.substr(0, dot_pos);
    auto [ptr, ec] = std::from_chars(layer_text.data(), layer_text.data() + layer_text.size(), hook.layer);
    require(ec == std::errc() && ptr == layer_text.data() + layer_text.size(), ErrorCode::invalid_argument,
            fmt::format("hook '{}' has a malformed layer index", text));
    const auto site = text.substr(dot_pos + 1);
    if (site == "pre")
        hook.site = HookSite::residual_pre;
    else if (site == "post")
        hook.site = HookSite::residual_post;
    else
        fail(ErrorCode::invalid_argument, fmt::format("hook '{}' has unknown site '{}'", text, site));
    return hook;
}

void SamplerConfig::validate() const {
    require(max_new_tokens >= 1, ErrorCode::invalid_argument, "sampler max_new_tokens must be >= 1");
    require(std::isfinite(temperature) && temperature > 0.0, ErrorCode::invalid_argument,
            "sampler temperature must be a positive finite number");
}

Matrix sinusoidal_positions(std::size_t max_seq, std::size_t d_model) {
    Matrix pos(max_seq, d_model);
    for (std::size_t t = 0; t < max_seq; ++t)
        for (std::size_t i = 0; i < d_model; ++i) {
            const double exponent = static_cast<double>(2 * (i / 2)) / static_cast<double>(d_model);
            const double angle = static_cast<double>(t) / std::pow(10000.0, exponent);
            pos(t, i) = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
        }
    return pos;
}

std::span<const double> final_logits(const LogitMatrix& logits) {
    require(logits.rows() >= 1, ErrorCode::invalid_argument, "logit matrix is empty");
    return logits.row(logits.rows() - 1);
}

Model::Model(ModelConfig config, ModelWeights weights, std::optional<PlantedModelSpec> planted)
    : config_(config), weights_(std::move(weights)), planted_(std::move(planted)) {
    config_.validate();
    const auto v = config_.vocab_size, d = config_.d_model, m = config_.d_mlp;
    expect_shape(weights_.token_embed, v, d, "token_embed");
    expect_shape(weights_.positional, config_.max_seq, d, "positional");
    expect_shape(weights_.unembed, v, d, "unembed");
    expect_len(weights_.unembed_bias, v, "unembed_bias");
    require(weights_.blocks.size() == config_.n_layers, ErrorCode::dimension_mismatch,
            fmt::format("model has {} blocks, config says {}", weights_.blocks.size(), config_.n_layers));
    for (const auto& b : weights_.blocks) {
        expect_len(b.ln1_gain, d, "ln1_gain");
        expect_len(b.ln1_bias, d, "ln1_bias");
        expect_shape(b.w_q, d, d, "w_q");
        expect_shape(b.w_k, d, d, "w_k");
        expect_shape(b.w_v, d, d, "w_v");
        expect_shape(b.w_o, d, d, "w_o");
        expect_len(b.b_o, d, "b_o");
        expect_len(b.ln2_gain, d, "ln2_gain");
        expect_len(b.ln2_bias, d, "ln2_bias");
        expect_shape(b.w_in, m, d, "w_in");
        expect_len(b.b_in, m, "b_in");
        expect_shape(b.w_out, d, m, "w_out");
        expect_len(b.b_out, d, "b_out");
    }
    if (weights_.concept_basis.empty()) weights_.concept_basis = Matrix(0, d);
    require(weights_.concept_basis.cols() == d, ErrorCode::dimension_mismatch, "concept basis width != d_model");
}

void Model::validate_tokens(const TokenSequence& tokens) const {
    require(!tokens.empty(), ErrorCode::invalid_argument, "token sequence is empty");
    require(tokens.size() <= config_.max_seq, ErrorCode::out_of_range,
            fmt::format("sequence length {} exceeds max_seq {}", tokens.size(), config_.max_seq));
    for (std::size_t i = 0; i < tokens.size(); ++i)
        require(tokens[i] < config_.vocab_size, ErrorCode::out_of_range,
                fmt::format("token id {} at position {} outside vocabulary of size {}", tokens[i], i,
                            config_.vocab_size));
}

void Model::validate_hook(HookPoint hook) const {
    require(hook.layer <= config_.n_layers, ErrorCode::out_of_range,
            fmt::format("hook layer {} outside [0, {}]", hook.layer, config_.n_layers));
}

void Model::round_if_fp32(Matrix& m) const {
    if (config_.precision == Precision::fp32) round_to_float(m.data());
}

Matrix Model::embed(const TokenSequence& tokens) const {
    const std::size_t n = tokens.size(), d = config_.d_model;
    Matrix x(n, d);
    for (std::size_t t = 0; t < n; ++t) {
        const auto e = weights_.token_embed.row(tokens[t]);
        const auto p = weights_.positional.row(t);
        auto row = x.row(t);
        for (std::size_t i = 0; i < d; ++i) row[i] = e[i] + p[i];
    }
    const Matrix& basis = weights_.concept_basis;
    if (basis.rows() > 0 && n > 1) {
        // Causal concept carry: position t also holds the concept-subspace
        // component of every earlier token's embedding.
        Vector carried(d, 0.0);
        for (std::size_t t = 1; t < n; ++t) {
            const auto prev = weights_.token_embed.row(tokens[t - 1]);
            for (std::size_t k = 0; k < basis.rows(); ++k) {
                const auto q = basis.row(k);
                const double coef = dot(q, prev);
                for (std::size_t i = 0; i < d; ++i) carried[i] += coef * q[i];
            }
            auto row = x.row(t);
            for (std::size_t i = 0; i < d; ++i) row[i] += carried[i];
        }
    }
    round_if_fp32(x);
    return x;
}

Matrix Model::concept_blind(const Matrix& x) const {
    Matrix out = x;
    if (weights_.concept_basis.rows() == 0) return out;
    for (std::size_t r = 0; r < out.rows(); ++r) project_out(out.row(r), weights_.concept_basis);
    return out;
}

void Model::apply_block(const BlockWeights& block, Matrix& x) const {
    const std::size_t n = x.rows(), d = config_.d_model, heads = config_.n_heads, hd = config_.head_dim();

    Matrix a = concept_blind(x);
    layer_norm_rows(a, block.ln1_gain, block.ln1_bias);
    round_if_fp32(a);
    Matrix q = matmul_transposed(a, block.w_q);
    Matrix k = matmul_transposed(a, block.w_k);
    Matrix v = matmul_transposed(a, block.w_v);
    round_if_fp32(q), round_if_fp32(k), round_if_fp32(v);

    Matrix attn(n, d);
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    Vector weights(n);
    for (std::size_t h = 0; h < heads; ++h) {
        const std::size_t off = h * hd;
        for (std::size_t i = 0; i < n; ++i) {
            double max_score = -INFINITY;
            for (std::size_t j = 0; j <= i; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < hd; ++c) s += q(i, off + c) * k(j, off + c);
                weights[j] = s * scale;
                max_score = std::max(max_score, weights[j]);
            }
            double total = 0.0;
            for (std::size_t j = 0; j <= i; ++j) {
                weights[j] = std::exp(weights[j] - max_score);
                total += weights[j];
            }
            for (std::size_t j = 0; j <= i; ++j) {
                const double w = weights[j] / total;
                for (std::size_t c = 0; c < hd; ++c) attn(i, off + c) += w * v(j, off + c);
            }
        }
    }
    round_if_fp32(attn);
    Matrix o = matmul_transposed(attn, block.w_o);
    add_row_bias(o, block.b_o);
    round_if_fp32(o);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += o.data()[i];
    round_if_fp32(x);

    Matrix m = concept_blind(x);
    layer_norm_rows(m, block.ln2_gain, block.ln2_bias);
    round_if_fp32(m);
    Matrix hidden = matmul_transposed(m, block.w_in);
    add_row_bias(hidden, block.b_in);
    for (double& h : hidden.data()) h = gelu(h);
    round_if_fp32(hidden);
    Matrix out = matmul_transposed(hidden, block.w_out);
    add_row_bias(out, block.b_out);
    round_if_fp32(out);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] += out.data()[i];
    round_if_fp32(x);
}

LogitMatrix Model::run(const TokenSequence& tokens, std::span<const ResidualEdit> edits,
                       const Observer& observer) const {
    validate_tokens(tokens);
    std::vector<const ResidualEdit*> ordered;
    for (const auto& e : edits) {
        validate_hook(e.hook);
        require(static_cast<bool>(e.transform), ErrorCode::invalid_argument,
                fmt::format("edit at hook {} has no transform", e.hook.to_string()));
        ordered.push_back(&e);
    }
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->hook < b->hook; });
    for (std::size_t i = 1; i < ordered.size(); ++i)
        require(ordered[i - 1]->hook != ordered[i]->hook, ErrorCode::invalid_argument,
                fmt::format("duplicate intervention at hook {}", ordered[i]->hook.to_string()));

    Matrix x = embed(tokens);
    std::size_t next_edit = 0;
    auto visit = [&](HookPoint hook) {
        if (observer) observer(hook, x);
        if (next_edit < ordered.size() && ordered[next_edit]->hook == hook) {
            Matrix y = ordered[next_edit]->transform(x);
            require(y.rows() == x.rows() && y.cols() == x.cols(), ErrorCode::dimension_mismatch,
                    fmt::format("transform at hook {} changed the residual shape from {}x{} to {}x{}",
                                hook.to_string(), x.rows(), x.cols(), y.rows(), y.cols()));
            x = std::move(y);
            round_if_fp32(x);
            ++next_edit;
        }
    };

    for (std::size_t l = 0; l < config_.n_layers; ++l) {
        visit({l, HookSite::residual_pre});
        apply_block(weights_.blocks[l], x);
        visit({l, HookSite::residual_post});
    }
    visit({config_.n_layers, HookSite::residual_pre});
    visit({config_.n_layers, HookSite::residual_post});

    LogitMatrix logits = matmul_transposed(x, weights_.unembed);
    add_row_bias(logits, weights_.unembed_bias);
    round_if_fp32(logits);
    return logits;
}

LogitMatrix Model::forward(const TokenSequence& tokens) const { return run(tokens, {}, {}); }

ResidualActivations Model::capture(const TokenSequence& tokens, HookPoint hook) const {
    validate_hook(hook);
    ResidualActivations captured;
    run(tokens, {}, [&](HookPoint h, const Matrix& x) {
        if (h == hook) captured = x;
    });
    return captured;
}

LogitMatrix Model::forward_with_intervention(const TokenSequence& tokens, std::span<const ResidualEdit> edits) const {
    return run(tokens, edits, {});
}

TokenSequence Model::generate(const TokenSequence& prompt, const SamplerConfig& sampler,
                              std::span<const ResidualEdit> edits) const {
    sampler.validate();
    validate_tokens(prompt);
    require(prompt.size() + sampler.max_new_tokens <= config_.max_seq, ErrorCode::out_of_range,
            fmt::format("prompt length {} plus {} new tokens exceeds max_seq {}", prompt.size(),
                        sampler.max_new_tokens, config_.max_seq));
    Rng rng(sampler.seed);
    TokenSequence seq = prompt;
    TokenSequence generated;
    Vector probs(config_.vocab_size);
    for (std::size_t step = 0; step < sampler.max_new_tokens; ++step) {
        const LogitMatrix logits = run(seq, edits, {});
        const auto last = final_logits(logits);
        TokenId next = 0;
        if (sampler.mode == SamplingMode::greedy) {
            next = static_cast<TokenId>(std::max_element(last.begin(), last.end()) - last.begin());
        } else {
            const double mx = *std::max_element(last.begin(), last.end());
            double total = 0.0;
            for (std::size_t i = 0; i < last.size(); ++i) {
                probs[i] = std::exp((last[i] - mx) / sampler.temperature);
                total += probs[i];
            }
            const double u = rng.uniform() * total;
            double acc = 0.0;
            next = static_cast<TokenId>(last.size() - 1);
            for (std::size_t i = 0; i < last.size(); ++i) {
                acc += probs[i];
                if (u < acc) {
                    next = static_cast<TokenId>(i);
                    break;
                }
            }
        }
        seq.push_back(next);
        generated.push_back(next);
    }
    return generated;
}

Model build_random_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    Rng rng(seed);
    const auto v = config.vocab_size, d = config.d_model, m = config.d_mlp;
    const double sd_d = 1.0 / std::sqrt(static_cast<double>(d));
    const double sd_m = 1.0 / std::sqrt(static_cast<double>(m));

    ModelWeights w;
    w.token_embed = random_matrix(rng, v, d, 1.0);
    w.positional = sinusoidal_positions(config.max_seq, d);
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        BlockWeights b;
        b.ln1_gain.assign(d, 1.0);
        b.ln1_bias.assign(d, 0.0);
        b.w_q = random_matrix(rng, d, d, sd_d);
        b.w_k = random_matrix(rng, d, d, sd_d);
        b.w_v = random_matrix(rng, d, d, sd_d);
        b.w_o = random_matrix(rng, d, d, sd_d);
        b.b_o.assign(d, 0.0);
        b.ln2_gain.assign(d, 1.0);
        b.ln2_bias.assign(d, 0.0);
        b.w_in = random_matrix(rng, m, d, sd_d);
        b.b_in.assign(m, 0.0);
        b.w_out = random_matrix(rng, d, m, sd_m);
        b.b_out.assign(d, 0.0);
        w.blocks.push_back(std::move(b));
    }
    w.unembed = random_matrix(rng, v, d, sd_d);
    w.unembed_bias.assign(v, 0.0);
    w.concept_basis = Matrix(0, d);
    if (config.precision == Precision::fp32) round_weights(w);
    return Model(config, std::move(w));
}

Model build_planted_model(const ModelConfig& config, const PlantedModelSpec& spec, std::uint64_t seed) {
    config.validate();
    const auto d = config.d_model;
    require(spec.concept_directions.size() <= d, ErrorCode::invalid_argument,
            "more planted concepts than residual dimensions");
    Matrix basis(spec.concept_directions.size(), d);
    std::map<std::string, std::size_t> concept_row;
    {
        std::size_t k = 0;
        for (const auto& [name, dir] : spec.concept_directions) {
            require(dir.size() == d, ErrorCode::dimension_mismatch,
                    fmt::format("concept '{}' direction has length {}, expected {}", name, dir.size(), d));
            require(all_finite(dir), ErrorCode::non_finite, fmt::format("concept '{}' direction is not finite", name));
            require(std::abs(norm(dir) - 1.0) <= 1e-9, ErrorCode::invalid_argument,
                    fmt::format("concept '{}' direction is not unit norm", name));
            std::copy(dir.begin(), dir.end(), basis.row(k).begin());
            concept_row[name] = k++;
        }
        for (std::size_t a = 0; a < basis.rows(); ++a)
            for (std::size_t b = a + 1; b < basis.rows(); ++b)
                require(std::abs(dot(basis.row(a), basis.row(b))) <= 1e-9, ErrorCode::invalid_argument,
                        "planted concept directions are not pairwise orthogonal");
    }
    for (const auto& [token, inj] : spec.token_injections) {
        require(token < config.vocab_size, ErrorCode::out_of_range,
                fmt::format("injected token {} outside vocabulary", token));
        require(concept_row.contains(inj.concept_name), ErrorCode::invalid_argument,
                fmt::format("injection references unknown concept '{}'", inj.concept_name));
        require(std::isfinite(inj.magnitude), ErrorCode::non_finite, "injection magnitude is not finite");
    }
    for (const auto& c : spec.answer_couplings) {
        require(c.answer_token < config.vocab_size, ErrorCode::out_of_range,
                fmt::format("answer token {} outside vocabulary", c.answer_token));
        require(concept_row.contains(c.concept_name), ErrorCode::invalid_argument,
                fmt::format("coupling references unknown concept '{}'", c.concept_name));
        require(std::isfinite(c.strength), ErrorCode::non_finite, "coupling strength is not finite");
    }

    // Start from the unplanted model with the same seed, then carve the
    // concept subspace out of everything that could write to or read from it.
    ModelConfig wide = config;
    wide.precision = Precision::fp64;
    ModelWeights w = build_random_model(wide, seed).weights();

    for (std::size_t t = 0; t < config.vocab_size; ++t) project_out(w.token_embed.row(t), basis);
    for (const auto& [token, inj] : spec.token_injections) {
        const auto dir = basis.row(concept_row.at(inj.concept_name));
        auto row = w.token_embed.row(token);
        for (std::size_t i = 0; i < d; ++i) row[i] += inj.magnitude * dir[i];
    }
    for (std::size_t t = 0; t < config.max_seq; ++t) project_out(w.positional.row(t), basis);
    for (auto& b : w.blocks) {
        project_out_columns(b.w_o, basis);
        project_out(b.b_o, basis);
        project_out_columns(b.w_out, basis);
        project_out(b.b_out, basis);
    }
    for (std::size_t t = 0; t < config.vocab_size; ++t) project_out(w.unembed.row(t), basis);
    for (const auto& c : spec.answer_couplings) {
        const auto dir = basis.row(concept_row.at(c.concept_name));
        auto row = w.unembed.row(c.answer_token);
        for (std::size_t i = 0; i < d; ++i) row[i] += c.strength * dir[i];
    }
    w.concept_basis = basis;
    if (config.precision == Precision::fp32) round_weights(w);
    return Model(config, std::move(w), spec);
}

void Model::save(const std::filesystem::path& path) const {
    TensorBundle bundle;
    bundle.kind = "model";
    bundle.meta["config"] = {{"vocab_size", config_.vocab_size}, {"d_model", config_.d_model},
                             {"n_layers", config_.n_layers},     {"n_heads", config_.n_heads},
                             {"d_mlp", config_.d_mlp},           {"max_seq", config_.max_seq},
                             {"precision", to_string(config_.precision)}};
    auto& t = bundle.tensors;
    t.push_back(Tensor::from_matrix("token_embed", weights_.token_embed));
    t.push_back(Tensor::from_matrix("positional", weights_.positional));
    for (std::size_t l = 0; l < weights_.blocks.size(); ++l) {
        const auto& b = weights_.blocks[l];
        const auto p = fmt::format("blocks.{}.", l);
        t.push_back(Tensor::from_vector(p + "ln1_gain", b.ln1_gain));
        t.push_back(Tensor::from_vector(p + "ln1_bias", b.ln1_bias));
        t.push_back(Tensor::from_matrix(p + "w_q", b.w_q));
        t.push_back(Tensor::from_matrix(p + "w_k", b.w_k));
        t.push_back(Tensor::from_matrix(p + "w_v", b.w_v));
        t.push_back(Tensor::from_matrix(p + "w_o", b.w_o));
        t.push_back(Tensor::from_vector(p + "b_o", b.b_o));
        t.push_back(Tensor::from_vector(p + "ln2_gain", b.ln2_gain));
        t.push_back(Tensor::from_vector(p + "ln2_bias", b.ln2_bias));
        t.push_back(Tensor::from_matrix(p + "w_in", b.w_in));
        t.push_back(Tensor::from_vector(p + "b_in", b.b_in));
        t.push_back(Tensor::from_matrix(p + "w_out", b.w_out));
        t.push_back(Tensor::from_vector(p + "b_out", b.b_out));
    }
    t.push_back(Tensor::from_matrix("unembed", weights_.unembed));
    t.push_back(Tensor::from_vector("unembed_bias", weights_.unembed_bias));
    t.push_back(Tensor::from_matrix("concept_basis", weights_.concept_basis));
    if (planted_) {
        nlohmann::json planted;
        planted["concepts"] = nlohmann::json::array();
        for (const auto& [name, dir] : planted_->concept_directions) {
            planted["concepts"].push_back(name);
            t.push_back(Tensor::from_vector("planted.direction." + name, dir));
        }
        planted["injections"] = nlohmann::json::array();
        for (const auto& [token, inj] : planted_->token_injections)
            planted["injections"].push_back(
                {{"token", token}, {"concept", inj.concept_name}, {"magnitude", inj.magnitude}});
        planted["couplings"] = nlohmann::json::array();
        for (const auto& c : planted_->answer_couplings)
            planted["couplings"].push_back(
                {{"concept", c.concept_name}, {"answer_token", c.answer_token}, {"strength", c.strength}});
        bundle.meta["planted"] = planted;
    }
    write_tensor_file(path, bundle);
}

Model Model::load(const std::filesystem::path& path) {
    const auto bundle = read_tensor_file(path, "model");
    ModelConfig config;
    ModelWeights w;
    std::optional<PlantedModelSpec> planted;
    try {
        const auto& c = bundle.meta.at("config");
        config.vocab_size = c.at("vocab_size").get<std::size_t>();
        config.d_model = c.at("d_model").get<std::size_t>();
        config.n_layers = c.at("n_layers").get<std::size_t>();
        config.n_heads = c.at("n_heads").get<std::size_t>();
        config.d_mlp = c.at("d_mlp").get<std::size_t>();
        config.max_seq = c.at("max_seq").get<std::size_t>();
        config.precision = parse_precision(c.at("precision").get<std::string>());
        if (bundle.meta.contains("planted")) {
            const auto& p = bundle.meta.at("planted");
            PlantedModelSpec spec;
            for (const auto& name : p.at("concepts"))
                spec.concept_directions[name.get<std::string>()] =
                    bundle.vector("planted.direction." + name.get<std::string>());
            for (const auto& inj : p.at("injections"))
                spec.token_injections[inj.at("token").get<TokenId>()] =
                    TokenInjection{inj.at("concept").get<std::string>(), inj.at("magnitude").get<double>()};
            for (const auto& cp : p.at("couplings"))
                spec.answer_couplings.push_back(AnswerCoupling{cp.at("concept").get<std::string>(),
                                                               cp.at("answer_token").get<TokenId>(),
                                                               cp.at("strength").get<double>()});
            planted = std::move(spec);
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::format, fmt::format("{}: model header malformed: {}", path.string(), e.what()));
    }
    w.token_embed = bundle.matrix("token_embed");
    w.positional = bundle.matrix("positional");
    for (std::size_t l = 0; l < config.n_layers; ++l) {
        const auto p = fmt::format("blocks.{}.", l);
        BlockWeights b;
        b.ln1_gain = bundle.vector(p + "ln1_gain");
        b.ln1_bias = bundle.vector(p + "ln1_bias");
        b.w_q = bundle.matrix(p + "w_q");
        b.w_k = bundle.matrix(p + "w_k");
        b.w_v = bundle.matrix(p + "w_v");
        b.w_o = bundle.matrix(p + "w_o");
        b.b_o = bundle.vector(p + "b_o");
        b.ln2_gain = bundle.vector(p + "ln2_gain");
        b.ln2_bias = bundle.vector(p + "ln2_bias");
        b.w_in = bundle.matrix(p + "w_in");
        b.b_in = bundle.vector(p + "b_in");
        b.w_out = bundle.matrix(p + "w_out");
        b.b_out = bundle.vector(p + "b_out");
        w.blocks.push_back(std::move(b));
    }
    w.unembed = bundle.matrix("unembed");
    w.unembed_bias = bundle.vector("unembed_bias");
    w.concept_basis = bundle.matrix("concept_basis");
    return Model(config, std::move(w), std::move(planted));
}

}  // namespace saeaudit
