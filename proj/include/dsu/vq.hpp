// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dsu/binary.hpp"
#include "dsu/features.hpp"

namespace dsu::vq {

// Non-owning row-major view over N frames of dimension dim.
struct FrameView {
    std::span<const float> values;
    std::size_t dim = 0;

    std::size_t rows() const { return dim == 0 ? 0 : values.size() / dim; }
    std::span<const float> row(std::size_t i) const { return values.subspan(i * dim, dim); }
};

// Concatenates the frames of a corpus in order; all sequences must share dim.
std::vector<float> stack_frames(std::span<const features::FeatureSequence> corpus, std::size_t& dim);

std::size_t count_distinct_rows(FrameView data);

/// K centroids plus the training provenance that is persisted with them.
class Codebook {
public:
    Codebook() = default;
    Codebook(std::vector<float> centroids, std::size_t dim, std::uint64_t seed, double train_inertia,
             std::size_t iterations_run = 0);

    std::size_t k() const { return dim_ == 0 ? 0 : centroids_.size() / dim_; }
    std::size_t dim() const { return dim_; }
    std::span<const float> centroid(std::size_t i) const { return std::span(centroids_).subspan(i * dim_, dim_); }
    std::span<const float> centroids() const { return centroids_; }
    FrameView view() const { return {centroids_, dim_}; }
    std::uint64_t seed() const { return seed_; }
    double train_inertia() const { return train_inertia_; }
    std::size_t iterations_run() const { return iterations_run_; }

    // Equality over persisted fields (iterations_run is not stored on disk).
    bool same_contents(const Codebook& other) const;

private:
    std::vector<float> centroids_;
    std::size_t dim_ = 0;
    std::uint64_t seed_ = 0;
    double train_inertia_ = 0.0;
    std::size_t iterations_run_ = 0;
};

/// Cluster-index sequence Z, 0-based.
struct DsuSequence {
    std::vector<std::uint32_t> units;
    std::uint32_t k = 0;
    double frame_rate_hz = 0.0;
    std::string source_id;

    bool operator==(const DsuSequence&) const = default;
};

std::vector<float> kmeans_pp_init(FrameView data, std::size_t k, std::uint64_t seed, unsigned threads = 1);

struct KMeansOptions {
    std::size_t k = 1000;
    std::uint64_t seed = 0;
    std::size_t max_iters = 300;
    double rel_tol = 1e-4;
    std::optional<std::size_t> sample_cap;
    unsigned threads = 1;
};

struct KMeansResult {
    Codebook codebook;
    // Inertia of every accepted assignment step, starting with the initial
    // centroids. Non-increasing by construction.
    std::vector<double> inertia_history;
};

KMeansResult kmeans_train(FrameView data, const KMeansOptions& opts);

std::uint32_t assign(const Codebook& cb, std::span<const float> v);
// Squared Euclidean distance accumulated in double, dimension by dimension.
double squared_distance(std::span<const float> a, std::span<const float> b);

DsuSequence quantize(const Codebook& cb, const features::FeatureSequence& f, unsigned threads = 1);

double inertia(const Codebook& cb, FrameView data, unsigned threads = 1);

Bytes write_codebook(const Codebook& cb);
Codebook read_codebook(std::span<const std::uint8_t> bytes);
void write_codebook_file(const Codebook& cb, const std::filesystem::path& path);
Codebook read_codebook_file(const std::filesystem::path& path);

}  // namespace dsu::vq
