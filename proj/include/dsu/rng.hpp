// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

namespace dsu {

std::uint64_t splitmix64(std::uint64_t x);

// Per-stage seed: splitmix64(global ^ fnv1a64(stage)). One global seed thus
// reproduces every randomized stage while keeping their streams independent.
std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view stage);

// mt19937_64 plus distribution helpers written out by hand: the std::
// distributions are implementation-defined, and artifacts must be
// byte-identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }
    double uniform();                         // [0, 1), 53-bit resolution
    double uniform(double lo, double hi);     // [lo, hi)
    std::size_t index(std::size_t n);         // uniform in [0, n), unbiased
    double normal();                          // standard normal, Box-Muller
    std::size_t geometric(double p);          // support {1, 2, ...}, mean 1/p

    template <typename T>
    void shuffle(std::span<T> items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace dsu
