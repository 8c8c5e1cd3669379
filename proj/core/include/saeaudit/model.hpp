// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "saeaudit/matrix.hpp"
#include "saeaudit/vocab.hpp"

namespace saeaudit {

enum class Precision { fp32, fp64 };

std::string_view to_string(Precision p);
Precision parse_precision(std::string_view text);

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t d_model = 0;
    std::size_t n_layers = 0;
    std::size_t n_heads = 0;
    std::size_t d_mlp = 0;
    std::size_t max_seq = 0;
    Precision precision = Precision::fp64;

    void validate() const;
    std::size_t head_dim() const { return d_model / n_heads; }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

enum class HookSite { residual_pre, residual_post };

// A named point on the residual stream. (l, residual_pre) is the input of
// block l and (l, residual_post) its output; layer == n_layers addresses the
// final stream that feeds the unembedding. Ordering follows the stream.
struct HookPoint {
    std::size_t layer = 0;
    HookSite site = HookSite::residual_pre;

    std::string to_string() const;
    // Accepts "<layer>.pre" or "<layer>.post".
    static HookPoint parse(std::string_view text);

    friend auto operator<=>(const HookPoint&, const HookPoint&) = default;
};

using ResidualActivations = Matrix;  // n_tokens x d_model
using LogitMatrix = Matrix;          // n_tokens x vocab_size

// Replaces the residual at `hook` with transform(residual). The transform
// must preserve shape.
struct ResidualEdit {
    HookPoint hook;
    std::function<Matrix(const Matrix&)> transform;
};

struct TokenInjection {
    std::string concept_name;
    double magnitude = 0.0;
};

struct AnswerCoupling {
    std::string concept_name;
    TokenId answer_token = 0;
    double strength = 0.0;
};

// Ground-truth structure for a planted model: unit, pairwise-orthogonal
// concept directions, tokens that inject concept mass, and answer tokens
// whose logits read those directions.
struct PlantedModelSpec {
    std::map<std::string, Vector> concept_directions;
    std::map<TokenId, TokenInjection> token_injections;
    std::vector<AnswerCoupling> answer_couplings;
};

enum class SamplingMode { greedy, temperature };

struct SamplerConfig {
    SamplingMode mode = SamplingMode::greedy;
    double temperature = 1.0;
    std::size_t max_new_tokens = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

struct BlockWeights {
    Vector ln1_gain, ln1_bias;
    Matrix w_q, w_k, w_v, w_o;  // d_model x d_model
    Vector b_o;
    Vector ln2_gain, ln2_bias;
    Matrix w_in;  // d_mlp x d_model
    Vector b_in;
    Matrix w_out;  // d_model x d_mlp
    Vector b_out;
};

struct ModelWeights {
    Matrix token_embed;  // vocab x d_model
    Matrix positional;   // max_seq x d_model (fixed sinusoidal table)
    std::vector<BlockWeights> blocks;
    Matrix unembed;  // vocab x d_model
    Vector unembed_bias;
    // Orthonormal rows spanning the planted concept subspace (0 rows for
    // unplanted models). Blocks read only the orthogonal complement and the
    // embedding carries earlier tokens' concept mass forward causally.
    Matrix concept_basis;
};

// Pre-norm decoder-only transformer (causal softmax attention, GELU MLP, no
// final norm). Immutable after construction; all member functions are const
// and safe to call concurrently.
class Model {
public:
    Model(ModelConfig config, ModelWeights weights, std::optional<PlantedModelSpec> planted = std::nullopt);

    const ModelConfig& config() const noexcept { return config_; }
    const ModelWeights& weights() const noexcept { return weights_; }
    const std::optional<PlantedModelSpec>& planted_spec() const noexcept { return planted_; }

    LogitMatrix forward(const TokenSequence& tokens) const;
    ResidualActivations capture(const TokenSequence& tokens, HookPoint hook) const;
    LogitMatrix forward_with_intervention(const TokenSequence& tokens, std::span<const ResidualEdit> edits) const;

    // Returns only the newly generated tokens. Edits are re-applied on every
    // step over the whole current sequence.
    TokenSequence generate(const TokenSequence& prompt, const SamplerConfig& sampler,
                           std::span<const ResidualEdit> edits = {}) const;

    void validate_tokens(const TokenSequence& tokens) const;
    void validate_hook(HookPoint hook) const;

    void save(const std::filesystem::path& path) const;
    static Model load(const std::filesystem::path& path);

private:
    using Observer = std::function<void(HookPoint, const Matrix&)>;
    LogitMatrix run(const TokenSequence& tokens, std::span<const ResidualEdit> edits, const Observer& observer) const;
    Matrix embed(const TokenSequence& tokens) const;
    void apply_block(const BlockWeights& block, Matrix& x) const;
    Matrix concept_blind(const Matrix& x) const;
    void round_if_fp32(Matrix& m) const;

    ModelConfig config_;
    ModelWeights weights_;
    std::optional<PlantedModelSpec> planted_;
};

Model build_random_model(const ModelConfig& config, std::uint64_t seed);
Model build_planted_model(const ModelConfig& config, const PlantedModelSpec& spec, std::uint64_t seed);

// Fixed sinusoidal position table, max_seq x d_model.
Matrix sinusoidal_positions(std::size_t max_seq, std::size_t d_model);

// Last row of a logit matrix.
std::span<const double> final_logits(const LogitMatrix& logits);

}  // namespace saeaudit
