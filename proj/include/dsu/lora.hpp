// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>

#include "dsu/adapter.hpp"

namespace dsu::lora {

using adapter::Matrix;
using adapter::Vector;

/// Low-rank update for a frozen linear layer W (out x in):
/// y = W x + (alpha / r) B (A x).
struct LoraParams {
    Matrix a;  // r x in
    Matrix b;  // out x r
    double alpha = 16.0;

    std::size_t rank() const { return static_cast<std::size_t>(a.rows()); }
    double scale() const { return alpha / static_cast<double>(rank()); }
};

// A ~ uniform(+-1/sqrt(in)), B = 0.
LoraParams init_lora(std::size_t in_dim, std::size_t out_dim, std::size_t rank = 8, double alpha = 16.0,
                     std::uint64_t seed = 0);

Vector lora_apply(const Matrix& w, const LoraParams& lora, const Vector& x);

// Row-wise batch form: each row of x is one input.
Matrix lora_apply_rows(const Matrix& w, const LoraParams& lora, const Matrix& x);

Matrix merged_weight(const Matrix& w, const LoraParams& lora);

}  // namespace dsu::lora
