// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsu/lora.hpp"

#include <cmath>
#include <string>

#include "dsu/error.hpp"
#include "dsu/rng.hpp"

namespace dsu::lora {

namespace {

void check_shapes(const Matrix& w, const LoraParams& lora, Eigen::Index in) {
    require(lora.a.rows() >= 1, ErrorCode::DimMismatch, "LoRA rank must be at least 1");
    require(w.cols() == in, ErrorCode::DimMismatch,
            "input has " + std::to_string(in) + " features, weight expects " + std::to_string(w.cols()));
    require(lora.a.cols() == w.cols(), ErrorCode::DimMismatch, "LoRA A columns do not match the weight input size");
    require(lora.b.rows() == w.rows(), ErrorCode::DimMismatch, "LoRA B rows do not match the weight output size");
    require(lora.b.cols() == lora.a.rows(), ErrorCode::DimMismatch, "LoRA A and B ranks differ");
}

}  // namespace

LoraParams init_lora(std::size_t in_dim, std::size_t out_dim, std::size_t rank, double alpha, std::uint64_t seed) {
    require(in_dim >= 1 && out_dim >= 1 && rank >= 1, ErrorCode::InvalidArgument, "LoRA dimensions must be positive");
    LoraParams p;
    p.alpha = alpha;
    p.a.resize(static_cast<Eigen::Index>(rank), static_cast<Eigen::Index>(in_dim));
    p.b = Matrix::Zero(static_cast<Eigen::Index>(out_dim), static_cast<Eigen::Index>(rank));
    Rng rng(seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (Eigen::Index i = 0; i < p.a.size(); ++i) p.a.data()[i] = rng.uniform(-bound, bound);
    return p;
}

Vector lora_apply(const Matrix& w, const LoraParams& lora, const Vector& x) {
    check_shapes(w, lora, x.size());
    Vector y = w * x;
    const Vector delta = lora.scale() * (lora.b * (lora.a * x));
    // Skipping exact zeros keeps the base output's bits (including -0.0).
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (delta(i) != 0.0) y(i) += delta(i);
    }
    return y;
}

Matrix lora_apply_rows(const Matrix& w, const LoraParams& lora, const Matrix& x) {
    check_shapes(w, lora, x.cols());
    Matrix y = x * w.transpose();
    const Matrix delta = lora.scale() * ((x * lora.a.transpose()) * lora.b.transpose());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (delta.data()[i] != 0.0) y.data()[i] += delta.data()[i];
    }
    return y;
}

Matrix merged_weight(const Matrix& w, const LoraParams& lora) {
    check_shapes(w, lora, w.cols());
    return w + lora.scale() * (lora.b * lora.a);
}

}  // namespace dsu::lora
