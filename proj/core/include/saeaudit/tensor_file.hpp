// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "saeaudit/matrix.hpp"

namespace saeaudit {

// Binary tensor container shared by models, SAEs, feature matrices and probes.
//
// Layout (all integers little-endian):
//   magic       8 bytes  "SAEAUDT\x01"
//   version     u32      kTensorFileVersion
//   header_len  u64
//   header      header_len bytes of JSON:
//                 {"kind": ..., "meta": {...},
//                  "tensors": [{"name", "dtype": "f64le", "shape", "offset", "nbytes"}]}
//   data        raw tensor payloads; offsets are relative to the data start
//
// The file must be consumed exactly: trailing or missing bytes are errors.
inline constexpr std::uint32_t kTensorFileVersion = 1;

struct Tensor {
    std::string name;
    std::vector<std::size_t> shape;
    std::vector<double> values;

    static Tensor from_matrix(std::string name, const Matrix& m);
    static Tensor from_vector(std::string name, const std::vector<double>& v);
    Matrix to_matrix() const;
};

struct TensorBundle {
    std::string kind;
    nlohmann::json meta = nlohmann::json::object();
    std::vector<Tensor> tensors;

    const Tensor& get(const std::string& name) const;
    bool contains(const std::string& name) const;
    Matrix matrix(const std::string& name) const { return get(name).to_matrix(); }
    std::vector<double> vector(const std::string& name) const;
};

// Written to a sibling temporary and renamed, so a failed write never leaves
// a partial file at `path`.
void write_tensor_file(const std::filesystem::path& path, const TensorBundle& bundle);
std::vector<std::uint8_t> encode_tensor_bundle(const TensorBundle& bundle);

TensorBundle read_tensor_file(const std::filesystem::path& path);
TensorBundle decode_tensor_bundle(const std::vector<std::uint8_t>& bytes);

// Reads `path` and checks its kind tag.
TensorBundle read_tensor_file(const std::filesystem::path& path, const std::string& expected_kind);

}  // namespace saeaudit
