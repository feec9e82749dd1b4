// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

// Slow, obviously-correct reference implementations used by the tests.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

// Pre-emphasis inside the frame, Hamming window, zero padding to n_fft.
inline std::vector<double> windowed(std::span<const float> frame, double preemph, std::size_t n_fft) {
    const std::size_t n = frame.size();
    std::vector<double> x(n_fft, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double prev = i == 0 ? frame[0] : frame[i - 1];
        const double emph = frame[i] - preemph * prev;
        const double w = n == 1 ? 1.0 : 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * double(i) / double(n - 1));
        x[i] = emph * w;
    }
    return x;
}

// |X_k|^2 for k = 0..N/2 by the defining sum.
inline std::vector<double> dft_power(const std::vector<double>& x) {
    const std::size_t n = x.size();
    std::vector<double> p(n / 2 + 1);
    for (std::size_t k = 0; k < p.size(); ++k) {
        long double re = 0.0, im = 0.0;
        for (std::size_t t = 0; t < n; ++t) {
            const long double ang = -2.0L * std::numbers::pi_v<long double> * (long double)((k * t) % n) / (long double)n;
            re += x[t] * std::cos(ang);
            im += x[t] * std::sin(ang);
        }
        p[k] = double(re * re + im * im);
    }
    return p;
}

// Exhaustive nearest centroid; the first minimum wins.
inline std::uint32_t nearest(const std::vector<float>& centroids, std::size_t dim, std::span<const float> v) {
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t arg = 0;
    for (std::size_t c = 0; c * dim < centroids.size(); ++c) {
        double d = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double diff = double(centroids[c * dim + j]) - double(v[j]);
            d += diff * diff;
        }
        if (d < best) {
            best = d;
            arg = static_cast<std::uint32_t>(c);
        }
    }
    return arg;
}

// Word-level Levenshtein distance.
inline std::size_t edit_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

using Dense = std::vector<std::vector<double>>;

inline Dense matmul(const Dense& a, const Dense& b) {
    Dense c(a.size(), std::vector<double>(b.empty() ? 0 : b[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t k = 0; k < b.size(); ++k)
            for (std::size_t j = 0; j < b[0].size(); ++j) c[i][j] += a[i][k] * b[k][j];
    return c;
}

// y = (W + scale * B A) x with the merged matrix built explicitly.
inline std::vector<double> dense_lora(const Dense& w, const Dense& a, const Dense& b, double scale,
                                      const std::vector<double>& x) {
    Dense merged = matmul(b, a);
    for (std::size_t i = 0; i < w.size(); ++i)
        for (std::size_t j = 0; j < w[i].size(); ++j) merged[i][j] = w[i][j] + scale * merged[i][j];
    std::vector<double> y(w.size(), 0.0);
    for (std::size_t i = 0; i < w.size(); ++i)
        for (std::size_t j = 0; j < x.size(); ++j) y[i] += merged[i][j] * x[j];
    return y;
}

struct NaiveMerge {
    std::uint32_t left, right, token;
};

// Recount every adjacent pair from scratch on each round; highest count
// wins, ties go to the smallest (left, right); merges are non-overlapping
// left to right.
inline std::vector<NaiveMerge> naive_bpe(std::vector<std::vector<std::uint32_t>> seqs, std::uint32_t base_k,
                                         std::size_t target_vocab) {
    std::vector<NaiveMerge> merges;
    while (base_k + merges.size() < target_vocab) {
        std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> counts;
        for (const auto& s : seqs)
            for (std::size_t i = 0; i + 1 < s.size(); ++i) ++counts[{s[i], s[i + 1]}];
        std::pair<std::uint32_t, std::uint32_t> best{};
        std::size_t best_count = 0;
        for (const auto& [pair, c] : counts) {
            if (c > best_count) {
                best_count = c;
                best = pair;
            }
        }
        if (best_count < 2) break;
        const auto token = static_cast<std::uint32_t>(base_k + merges.size());
        merges.push_back({best.first, best.second, token});
        for (auto& s : seqs) {
            std::vector<std::uint32_t> out;
            for (std::size_t i = 0; i < s.size();) {
                if (i + 1 < s.size() && s[i] == best.first && s[i + 1] == best.second) {
                    out.push_back(token);
                    i += 2;
                } else {
                    out.push_back(s[i++]);
                }
            }
            s = std::move(out);
        }
    }
    return merges;
}

}  // namespace oracle
