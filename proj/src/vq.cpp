// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsu/vq.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "dsu/error.hpp"
#include "dsu/parallel.hpp"
#include "dsu/rng.hpp"

namespace dsu::vq {

namespace {

constexpr std::uint32_t kFormatVersion = 1;
// Fixed chunking: the work split never depends on the worker count.
constexpr std::size_t kChunkRows = 1024;

std::size_t chunk_count(std::size_t rows) { return (rows + kChunkRows - 1) / kChunkRows; }

struct Nearest {
    std::uint32_t index = 0;
    double distance = 0.0;
};

Nearest nearest(FrameView centroids, std::span<const float> v) {
    Nearest best{0, squared_distance(centroids.row(0), v)};
    const std::size_t k = centroids.rows();
    for (std::size_t c = 1; c < k; ++c) {
        const double d = squared_distance(centroids.row(c), v);
        if (d < best.distance) best = {static_cast<std::uint32_t>(c), d};
    }
    return best;
}

// Labels and distances for every row, computed chunk-parallel.
void assign_all(FrameView centroids, FrameView data, unsigned threads, std::vector<std::uint32_t>& labels,
                std::vector<double>& dist) {
    const std::size_t n = data.rows();
    labels.resize(n);
    dist.resize(n);
    parallel_for(chunk_count(n), threads, [&](std::size_t chunk) {
        const std::size_t end = std::min(n, (chunk + 1) * kChunkRows);
        for (std::size_t i = chunk * kChunkRows; i < end; ++i) {
            const Nearest hit = nearest(centroids, data.row(i));
            labels[i] = hit.index;
            dist[i] = hit.distance;
        }
    });
}

double ordered_sum(const std::vector<double>& values) {
    double total = 0.0;
    for (double v : values) total += v;
    return total;
}

void check_data(FrameView data, std::size_t k) {
    require(data.dim >= 1, ErrorCode::InvalidArgument, "frame dimension must be >= 1");
    require(data.values.size() % data.dim == 0, ErrorCode::DimMismatch, "frame buffer is not a whole number of rows");
    require(k >= 1, ErrorCode::InvalidArgument, "K must be >= 1");
    const std::size_t distinct = count_distinct_rows(data);
    if (distinct < k) {
        raise(ErrorCode::DegenerateData, "need at least K=" + std::to_string(k) + " distinct points, have " +
                                             std::to_string(distinct));
    }
}

}  // namespace

std::vector<float> stack_frames(std::span<const features::FeatureSequence> corpus, std::size_t& dim) {
    dim = corpus.empty() ? 0 : corpus.front().dim();
    std::size_t total = 0;
    for (const auto& f : corpus) {
        require(f.dim() == dim, ErrorCode::DimMismatch,
                "utterance '" + f.source_id() + "' has dim " + std::to_string(f.dim()) + ", expected " +
                    std::to_string(dim));
        total += f.values().size();
    }
    std::vector<float> out;
    out.reserve(total);
    for (const auto& f : corpus) out.insert(out.end(), f.values().begin(), f.values().end());
    return out;
}

std::size_t count_distinct_rows(FrameView data) {
    const std::size_t n = data.rows();
    if (n == 0) return 0;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto less = [&](std::size_t a, std::size_t b) { return std::ranges::lexicographical_compare(data.row(a), data.row(b)); };
    std::sort(order.begin(), order.end(), less);
    std::size_t distinct = 1;
    for (std::size_t i = 1; i < n; ++i) {
        if (less(order[i - 1], order[i])) ++distinct;
    }
    return distinct;
}

Codebook::Codebook(std::vector<float> centroids, std::size_t dim, std::uint64_t seed, double train_inertia,
                   std::size_t iterations_run)
    : centroids_(std::move(centroids)),
      dim_(dim),
      seed_(seed),
      train_inertia_(train_inertia),
      iterations_run_(iterations_run) {
    require(dim_ >= 1, ErrorCode::InvalidArgument, "codebook dimension must be >= 1");
    require(centroids_.size() % dim_ == 0, ErrorCode::DimMismatch, "centroid buffer is not a whole number of rows");
    require(k() >= 2, ErrorCode::InvalidArgument, "codebook needs K >= 2");
    for (float v : centroids_) require(std::isfinite(v), ErrorCode::InvalidArgument, "centroid is not finite");
}

bool Codebook::same_contents(const Codebook& other) const {
    return dim_ == other.dim_ && seed_ == other.seed_ &&
           std::bit_cast<std::uint64_t>(train_inertia_) == std::bit_cast<std::uint64_t>(other.train_inertia_) &&
           std::ranges::equal(centroids_, other.centroids_, [](float a, float b) {
               return std::bit_cast<std::uint32_t>(a) == std::bit_cast<std::uint32_t>(b);
           });
}

double squared_distance(std::span<const float> a, std::span<const float> b) {
    double acc = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double diff = static_cast<double>(a[d]) - static_cast<double>(b[d]);
        acc += diff * diff;
    }
    return acc;
}

std::vector<float> kmeans_pp_init(FrameView data, std::size_t k, std::uint64_t seed, unsigned threads) {
    check_data(data, k);
    const std::size_t n = data.rows();
    Rng rng(seed);

    std::vector<float> centroids;
    centroids.reserve(k * data.dim);
    std::size_t pick = rng.index(n);
    centroids.insert(centroids.end(), data.row(pick).begin(), data.row(pick).end());

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(data.row(i), data.row(pick));

    while (centroids.size() < k * data.dim) {
        const double total = ordered_sum(d2);
        const double target = rng.uniform() * total;

        // Walk the cumulative mass; zero-weight points (already chosen) can
        // never satisfy the strict comparison.
        double cum = 0.0;
        pick = n;
        std::size_t last_positive = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (d2[i] > 0.0) last_positive = i;
            cum += d2[i];
            if (target < cum) {
                pick = i;
                break;
            }
        }
        if (pick == n) pick = last_positive;  // rounding pushed target past the end

        const auto chosen = data.row(pick);
        centroids.insert(centroids.end(), chosen.begin(), chosen.end());
        parallel_for(chunk_count(n), threads, [&](std::size_t chunk) {
            const std::size_t end = std::min(n, (chunk + 1) * kChunkRows);
            for (std::size_t i = chunk * kChunkRows; i < end; ++i) {
                d2[i] = std::min(d2[i], squared_distance(data.row(i), chosen));
            }
        });
    }
    return centroids;
}

KMeansResult kmeans_train(FrameView data, const KMeansOptions& opts) {
    require(opts.k >= 2, ErrorCode::InvalidArgument, "K must be >= 2");
    require(data.dim >= 1, ErrorCode::InvalidArgument, "frame dimension must be >= 1");
    require(opts.rel_tol >= 0.0, ErrorCode::InvalidArgument, "rel_tol must be >= 0");

    std::vector<float> sampled;
    FrameView train = data;
    if (opts.sample_cap && *opts.sample_cap < data.rows()) {
        require(*opts.sample_cap >= opts.k, ErrorCode::InvalidArgument, "sample_cap must be >= K");
        // Partial Fisher-Yates, then restore corpus order.
        Rng rng(derive_seed(opts.seed, "kmeans.sample"));
        std::vector<std::size_t> idx(data.rows());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        for (std::size_t i = 0; i < *opts.sample_cap; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
        idx.resize(*opts.sample_cap);
        std::sort(idx.begin(), idx.end());
        sampled.reserve(idx.size() * data.dim);
        for (std::size_t i : idx) sampled.insert(sampled.end(), data.row(i).begin(), data.row(i).end());
        train = FrameView{sampled, data.dim};
    }

    const std::size_t n = train.rows();
    const std::size_t k = opts.k;
    const std::size_t dim = train.dim;
    std::vector<float> centroids = kmeans_pp_init(train, k, opts.seed, opts.threads);

    std::vector<std::uint32_t> labels;
    std::vector<double> dist;
    assign_all({centroids, dim}, train, opts.threads, labels, dist);
    double current = ordered_sum(dist);
    std::vector<double> history{current};

    std::size_t iterations = 0;
    std::vector<double> sums(k * dim);
    std::vector<std::size_t> counts(k);
    std::vector<std::uint32_t> next_labels;
    std::vector<double> next_dist;
    while (iterations < opts.max_iters && current > 0.0) {
        std::ranges::fill(sums, 0.0);
        std::ranges::fill(counts, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = train.row(i);
            double* acc = sums.data() + labels[i] * dim;
            for (std::size_t d = 0; d < dim; ++d) acc[d] += row[d];
            ++counts[labels[i]];
        }

        std::vector<float> updated(k * dim);
        std::vector<std::size_t> empty;
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                empty.push_back(c);
                continue;
            }
            for (std::size_t d = 0; d < dim; ++d) {
                updated[c * dim + d] = static_cast<float>(sums[c * dim + d] / static_cast<double>(counts[c]));
            }
        }
        if (!empty.empty()) {
            // Reseed each empty cluster to the next-farthest point from its own centroid.
            std::vector<std::size_t> order(n);
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist[a] > dist[b]; });
            for (std::size_t e = 0; e < empty.size() && e < n; ++e) {
                const auto row = train.row(order[e]);
                std::ranges::copy(row, updated.begin() + static_cast<std::ptrdiff_t>(empty[e] * dim));
            }
        }

        assign_all({updated, dim}, train, opts.threads, next_labels, next_dist);
        const double next = ordered_sum(next_dist);
        if (next > current) break;  // float rounding of the means; keep the better state

        centroids = std::move(updated);
        labels.swap(next_labels);
        dist.swap(next_dist);
        ++iterations;
        const double improvement = (current - next) / current;
        current = next;
        history.push_back(current);
        if (improvement < opts.rel_tol) break;
    }

    return {Codebook(std::move(centroids), dim, opts.seed, current, iterations), std::move(history)};
}

std::uint32_t assign(const Codebook& cb, std::span<const float> v) {
    if (v.size() != cb.dim()) {
        raise(ErrorCode::DimMismatch,
              "vector has dim " + std::to_string(v.size()) + ", codebook dim is " + std::to_string(cb.dim()));
    }
    return nearest(cb.view(), v).index;
}

DsuSequence quantize(const Codebook& cb, const features::FeatureSequence& f, unsigned threads) {
    DsuSequence out;
    out.k = static_cast<std::uint32_t>(cb.k());
    out.frame_rate_hz = f.frame_rate_hz();
    out.source_id = f.source_id();
    if (f.empty()) return out;
    if (f.dim() != cb.dim()) {
        raise(ErrorCode::DimMismatch, "features '" + f.source_id() + "' have dim " + std::to_string(f.dim()) +
                                          ", codebook dim is " + std::to_string(cb.dim()));
    }
    std::vector<double> dist;
    assign_all(cb.view(), {f.values(), f.dim()}, threads, out.units, dist);
    return out;
}

double inertia(const Codebook& cb, FrameView data, unsigned threads) {
    require(data.dim == cb.dim(), ErrorCode::DimMismatch, "data and codebook dimensions differ");
    std::vector<std::uint32_t> labels;
    std::vector<double> dist;
    assign_all(cb.view(), data, threads, labels, dist);
    return ordered_sum(dist);
}

Bytes write_codebook(const Codebook& cb) {
    ByteWriter w;
    w.put_tag("DSUK");
    w.put_u32(kFormatVersion);
    w.put_u32(static_cast<std::uint32_t>(cb.k()));
    w.put_u32(static_cast<std::uint32_t>(cb.dim()));
    w.put_u64(cb.seed());
    w.put_f64(cb.train_inertia());
    for (float v : cb.centroids()) w.put_f32(v);
    return std::move(w).take();
}

Codebook read_codebook(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    if (r.remaining() < 4 || r.tag() != "DSUK") raise(ErrorCode::CorruptFile, "bad magic, expected DSUK");
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion) raise(ErrorCode::CorruptFile, "unsupported DSUK version " + std::to_string(version));
    const std::uint32_t k = r.u32();
    const std::uint32_t dim = r.u32();
    const std::uint64_t seed = r.u64();
    const double train_inertia = r.f64();
    if (k < 2 || dim == 0) raise(ErrorCode::CorruptFile, "codebook header declares K < 2 or dim 0");
    const std::uint64_t expected = static_cast<std::uint64_t>(k) * dim * 4;
    if (r.remaining() != expected) {
        raise(ErrorCode::CorruptFile, "codebook payload is " + std::to_string(r.remaining()) + " bytes, expected " +
                                          std::to_string(expected));
    }
    std::vector<float> centroids(static_cast<std::size_t>(k) * dim);
    for (float& v : centroids) {
        v = r.f32();
        if (!std::isfinite(v)) raise(ErrorCode::CorruptFile, "centroid is NaN or Inf");
    }
    return Codebook(std::move(centroids), dim, seed, train_inertia);
}

void write_codebook_file(const Codebook& cb, const std::filesystem::path& path) { write_file(path, write_codebook(cb)); }

Codebook read_codebook_file(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    try {
        return read_codebook(bytes);
    } catch (const Error& e) {
        throw e.with_context(path.string());
    }
}

}  // namespace dsu::vq
