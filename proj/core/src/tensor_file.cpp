// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "saeaudit/tensor_file.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <fmt/format.h>

#include "saeaudit/error.hpp"

namespace saeaudit {
namespace {

static_assert(std::endian::native == std::endian::little,
              "tensor container I/O assumes a little-endian host");

constexpr char kMagic[8] = {'S', 'A', 'E', 'A', 'U', 'D', 'T', '\x01'};
constexpr std::size_t kPreambleSize = 8 + 4 + 8;

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    out.insert(out.end(), raw, raw + sizeof(T));
}

template <typename T>
T take(const std::vector<std::uint8_t>& in, std::size_t offset) {
    T value;
    std::memcpy(&value, in.data() + offset, sizeof(T));
    return value;
}

std::size_t element_count(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (auto d : shape) n *= d;
    return n;
}

}  // namespace

Tensor Tensor::from_matrix(std::string name, const Matrix& m) {
    return Tensor{std::move(name), {m.rows(), m.cols()}, m.data()};
}

Tensor Tensor::from_vector(std::string name, const std::vector<double>& v) {
    return Tensor{std::move(name), {v.size()}, v};
}

Matrix Tensor::to_matrix() const {
    require(shape.size() == 2, ErrorCode::format, fmt::format("tensor '{}' is not rank 2", name));
    return Matrix(shape[0], shape[1], values);
}

const Tensor& TensorBundle::get(const std::string& name) const {
    auto it = std::find_if(tensors.begin(), tensors.end(), [&](const Tensor& t) { return t.name == name; });
    require(it != tensors.end(), ErrorCode::format, fmt::format("tensor '{}' missing from '{}' container", name, kind));
    return *it;
}

bool TensorBundle::contains(const std::string& name) const {
    return std::any_of(tensors.begin(), tensors.end(), [&](const Tensor& t) { return t.name == name; });
}

std::vector<double> TensorBundle::vector(const std::string& name) const {
    const auto& t = get(name);
    require(t.shape.size() == 1, ErrorCode::format, fmt::format("tensor '{}' is not rank 1", name));
    return t.values;
}

std::vector<std::uint8_t> encode_tensor_bundle(const TensorBundle& bundle) {
    nlohmann::json header;
    header["kind"] = bundle.kind;
    header["meta"] = bundle.meta;
    header["tensors"] = nlohmann::json::array();
    std::uint64_t offset = 0;
    for (const auto& t : bundle.tensors) {
        require(element_count(t.shape) == t.values.size(), ErrorCode::dimension_mismatch,
                fmt::format("tensor '{}' shape does not match its value count", t.name));
        const std::uint64_t nbytes = t.values.size() * sizeof(double);
        header["tensors"].push_back(
            {{"name", t.name}, {"dtype", "f64le"}, {"shape", t.shape}, {"offset", offset}, {"nbytes", nbytes}});
        offset += nbytes;
    }
    const std::string text = header.dump();

    std::vector<std::uint8_t> out;
    out.reserve(kPreambleSize + text.size() + offset);
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    put<std::uint32_t>(out, kTensorFileVersion);
    put<std::uint64_t>(out, text.size());
    out.insert(out.end(), text.begin(), text.end());
    for (const auto& t : bundle.tensors) {
        const auto* raw = reinterpret_cast<const std::uint8_t*>(t.values.data());
        out.insert(out.end(), raw, raw + t.values.size() * sizeof(double));
    }
    return out;
}

TensorBundle decode_tensor_bundle(const std::vector<std::uint8_t>& bytes) {
    require(bytes.size() >= kPreambleSize, ErrorCode::format, "tensor file truncated: incomplete preamble");
    require(std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin()), ErrorCode::format,
            "not a tensor container: bad magic bytes");
    const auto version = take<std::uint32_t>(bytes, 8);
    require(version == kTensorFileVersion, ErrorCode::format,
            fmt::format("tensor container version {} unsupported (expected {})", version, kTensorFileVersion));
    const auto header_len = take<std::uint64_t>(bytes, 12);
    require(header_len <= bytes.size() - kPreambleSize, ErrorCode::format, "tensor file truncated: incomplete header");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.begin() + kPreambleSize,
                                       bytes.begin() + static_cast<std::ptrdiff_t>(kPreambleSize + header_len));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::format, fmt::format("tensor container header is not valid JSON: {}", e.what()));
    }

    TensorBundle bundle;
    const std::size_t data_start = kPreambleSize + header_len;
    const std::size_t data_len = bytes.size() - data_start;
    std::uint64_t expected_offset = 0;
    try {
        bundle.kind = header.at("kind").get<std::string>();
        bundle.meta = header.at("meta");
        for (const auto& entry : header.at("tensors")) {
            Tensor t;
            t.name = entry.at("name").get<std::string>();
            require(entry.at("dtype").get<std::string>() == "f64le", ErrorCode::format,
                    fmt::format("tensor '{}' has unsupported dtype", t.name));
            t.shape = entry.at("shape").get<std::vector<std::size_t>>();
            const auto offset = entry.at("offset").get<std::uint64_t>();
            const auto nbytes = entry.at("nbytes").get<std::uint64_t>();
            require(offset == expected_offset, ErrorCode::format,
                    fmt::format("tensor '{}' offset {} does not follow previous tensor", t.name, offset));
            require(nbytes == element_count(t.shape) * sizeof(double), ErrorCode::format,
                    fmt::format("tensor '{}' byte count disagrees with its shape", t.name));
            require(offset + nbytes <= data_len, ErrorCode::format,
                    fmt::format("tensor file truncated inside tensor '{}'", t.name));
            t.values.resize(element_count(t.shape));
            std::memcpy(t.values.data(), bytes.data() + data_start + offset, nbytes);
            expected_offset = offset + nbytes;
            bundle.tensors.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::format, fmt::format("tensor container header malformed: {}", e.what()));
    }
    require(expected_offset == data_len, ErrorCode::format,
            fmt::format("tensor container has {} trailing bytes", data_len - expected_offset));
    return bundle;
}

void write_tensor_file(const std::filesystem::path& path, const TensorBundle& bundle) {
    const auto bytes = encode_tensor_bundle(bundle);
    auto tmp = path;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        require(out.good(), ErrorCode::io, fmt::format("cannot open '{}' for writing", tmp.string()));
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        require(out.good(), ErrorCode::io, fmt::format("write to '{}' failed", tmp.string()));
    }
    std::filesystem::rename(tmp, path);
}

TensorBundle read_tensor_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::io, fmt::format("cannot open '{}'", path.string()));
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_tensor_bundle(bytes);
    } catch (const Error& e) {
        fail(e.code(), fmt::format("{}: {}", path.string(), e.what()));
    }
}

TensorBundle read_tensor_file(const std::filesystem::path& path, const std::string& expected_kind) {
    auto bundle = read_tensor_file(path);
    require(bundle.kind == expected_kind, ErrorCode::format,
            fmt::format("{}: container holds '{}', expected '{}'", path.string(), bundle.kind, expected_kind));
    return bundle;
}

}  // namespace saeaudit
