// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "saeaudit/matrix.hpp"
#include "saeaudit/model.hpp"
#include "saeaudit/rng.hpp"
#include "saeaudit/sae.hpp"

namespace saeaudit::test {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        Rng rng(std::hash<std::string>{}(tag) ^ static_cast<std::uint64_t>(::getpid()));
        path_ = std::filesystem::temp_directory_path() / ("saeaudit-" + tag + "-" + std::to_string(rng.next() % 1000000007));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = scale * rng.normal();
    return m;
}

inline ModelConfig small_config(std::size_t vocab = 12, std::size_t d_model = 8) {
    return ModelConfig{vocab, d_model, 2, 2, 16, 16, Precision::fp64};
}

// An SAE with random weights and biases; a negative encoder bias keeps a
// fair share of latents inactive.
inline SaeModel random_sae(std::size_t width, std::size_t d_model, Rng& rng, double enc_bias = -0.3) {
    SaeModel sae;
    sae.enc_weight = random_matrix(width, d_model, rng, 1.0 / std::sqrt(static_cast<double>(d_model)));
    sae.enc_bias = Vector(width, enc_bias);
    for (auto& b : sae.enc_bias) b += 0.2 * rng.normal();
    sae.dec_weight = random_matrix(d_model, width, rng, 1.0 / std::sqrt(static_cast<double>(d_model)));
    sae.dec_bias = Vector(d_model);
    for (auto& b : sae.dec_bias) b = 0.1 * rng.normal();
    return sae;
}

inline TokenSequence random_tokens(std::size_t n, std::size_t vocab, Rng& rng) {
    TokenSequence t(n);
    for (auto& x : t) x = static_cast<TokenId>(rng.below(vocab));
    return t;
}

// One concept along (0.6, 0.8, 0, ...): `injected` carries mass m of it and
// the `yes` logit reads it with strength beta.
inline PlantedModelSpec one_concept_spec(std::size_t d, TokenId injected, TokenId yes, double m, double beta) {
    PlantedModelSpec spec;
    Vector dir(d, 0.0);
    dir[0] = 0.6;
    dir[1] = 0.8;
    spec.concept_directions["c"] = dir;
    spec.token_injections[injected] = {"c", m};
    spec.answer_couplings.push_back({"c", yes, beta});
    return spec;
}

}  // namespace saeaudit::test

namespace saeaudit::test {

// Rows are nonnegative sparse combinations of four orthonormal directions:
// each direction is active with probability 1/2 at a magnitude in [1, 3).
inline Matrix rank4_activations(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<Vector> dirs;
    while (dirs.size() < 4) {
        Vector v(d);
        for (auto& x : v) x = rng.normal();
        for (const auto& u : dirs) {
            const double c = dot(u, v);
            for (std::size_t i = 0; i < d; ++i) v[i] -= c * u[i];
        }
        const double n2 = norm(v);
        for (auto& x : v) x /= n2;
        dirs.push_back(v);
    }
    Matrix x(n, d);
    for (std::size_t r = 0; r < n; ++r)
        for (const auto& dir : dirs)
            if (rng.bernoulli(0.5)) {
                const double c = rng.uniform(1.0, 3.0);
                for (std::size_t i = 0; i < d; ++i) x(r, i) += c * dir[i];
            }
    return x;
}

}  // namespace saeaudit::test
