// Copyright (c) 2026, The saeaudit Authors
// SPDX-License-Identifier: Apache-2.0

#include "saeaudit/matrix.hpp"

#include <cmath>

#include <fmt/format.h>

#include "saeaudit/error.hpp"

namespace saeaudit {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    require(data_.size() == rows * cols, ErrorCode::dimension_mismatch,
            fmt::format("matrix data has {} entries, expected {}x{}", data_.size(), rows, cols));
}

Vector Matrix::column(std::size_t c) const {
    Vector out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

Matrix Matrix::transposed() const {
    Matrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
    return out;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    require(a.size() == b.size(), ErrorCode::dimension_mismatch,
            fmt::format("dot: lengths {} and {} differ", a.size(), b.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Vector matvec(const Matrix& a, std::span<const double> x) {
    require(a.cols() == x.size(), ErrorCode::dimension_mismatch,
            fmt::format("matvec: matrix has {} columns, vector has {} entries", a.cols(), x.size()));
    Vector y(a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) y[r] = dot(a.row(r), x);
    return y;
}

Vector matvec_transposed(const Matrix& a, std::span<const double> x) {
    require(a.rows() == x.size(), ErrorCode::dimension_mismatch,
            fmt::format("matvec_transposed: matrix has {} rows, vector has {} entries", a.rows(), x.size()));
    Vector y(a.cols(), 0.0);
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const double s = x[r];
        const auto row = a.row(r);
        for (std::size_t c = 0; c < a.cols(); ++c) y[c] += row[c] * s;
    }
    return y;
}

Matrix matmul_transposed(const Matrix& x, const Matrix& w) {
    require(x.cols() == w.cols(), ErrorCode::dimension_mismatch,
            fmt::format("matmul_transposed: inner dimensions {} and {} differ", x.cols(), w.cols()));
    Matrix out(x.rows(), w.rows());
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto xi = x.row(i);
        for (std::size_t j = 0; j < w.rows(); ++j) out(i, j) = dot(xi, w.row(j));
    }
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    require(a.cols() == b.rows(), ErrorCode::dimension_mismatch,
            fmt::format("matmul: inner dimensions {} and {} differ", a.cols(), b.rows()));
    Matrix out(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double s = a(i, k);
            const auto brow = b.row(k);
            auto orow = out.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += s * brow[j];
        }
    return out;
}

void add_row_bias(Matrix& x, std::span<const double> bias) {
    require(x.cols() == bias.size(), ErrorCode::dimension_mismatch, "bias length does not match columns");
    for (std::size_t r = 0; r < x.rows(); ++r) {
        auto row = x.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias[c];
    }
}

bool all_finite(std::span<const double> values) {
    for (double v : values)
        if (!std::isfinite(v)) return false;
    return true;
}

void round_to_float(std::span<double> values) {
    for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace saeaudit
