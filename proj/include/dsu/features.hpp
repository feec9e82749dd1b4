// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dsu/audio_io.hpp"
#include "dsu/binary.hpp"

namespace dsu::features {

/// Frame-level feature matrix H (frames x dim, row-major) plus the metadata
/// needed to interpret it. The source tag is "mfcc" or "external:<name>".
class FeatureSequence {
public:
    FeatureSequence() = default;
    FeatureSequence(std::vector<float> values, std::size_t dim, float frame_rate_hz, std::string source,
                    std::string source_id);

    std::size_t dim() const { return dim_; }
    std::size_t num_frames() const { return dim_ == 0 ? 0 : values_.size() / dim_; }
    bool empty() const { return values_.empty(); }
    float frame_rate_hz() const { return frame_rate_hz_; }
    const std::string& source() const { return source_; }
    const std::string& source_id() const { return source_id_; }

    std::span<const float> frame(std::size_t t) const { return std::span(values_).subspan(t * dim_, dim_); }
    std::span<const float> values() const { return values_; }

    void set_source_id(std::string id) { source_id_ = std::move(id); }

    bool operator==(const FeatureSequence&) const = default;

private:
    std::vector<float> values_;
    std::size_t dim_ = 0;
    float frame_rate_hz_ = 0.0f;
    std::string source_;
    std::string source_id_;
};

struct MfccConfig {
    double preemphasis = 0.97;
    double frame_len_ms = 25.0;
    double hop_ms = 10.0;
    std::size_t fft_size = 512;
    std::size_t n_mels = 26;
    double mel_low_hz = 20.0;
    double mel_high_hz = 8000.0;
    std::size_t n_ceps = 13;
    int delta_window = 2;
    double log_floor = 1e-10;

    std::size_t frame_len_samples(int sample_rate_hz) const;
    std::size_t hop_samples(int sample_rate_hz) const;
    void validate(int sample_rate_hz) const;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// n_mels x (fft_size/2 + 1) triangular filters on the HTK mel scale.
std::vector<std::vector<double>> mel_filterbank(const MfccConfig& cfg, int sample_rate_hz);

// Orthonormal DCT-II, rows = output coefficients (n_out x n_in).
std::vector<std::vector<double>> dct_matrix(std::size_t n_out, std::size_t n_in);

// Hamming-windowed, pre-emphasized power spectrum of one frame, fft_size/2+1 bins.
std::vector<double> power_spectrum(std::span<const float> frame, const MfccConfig& cfg);

// Log mel energies per frame (frames x n_mels) before the DCT.
std::vector<std::vector<double>> log_mel_energies(const audio::Waveform& w, const MfccConfig& cfg);

// 13 cepstra + deltas + delta-deltas at frame rate sample_rate/hop.
FeatureSequence mfcc(const audio::Waveform& w, const MfccConfig& cfg = {});

// Regression deltas with edge replication; output has the input's shape.
FeatureSequence deltas(const FeatureSequence& f, int window);

// DSUF binary format.
Bytes write_features(const FeatureSequence& f);
FeatureSequence read_features(std::span<const std::uint8_t> bytes);
void write_features_file(const FeatureSequence& f, const std::filesystem::path& path);
FeatureSequence read_features_file(const std::filesystem::path& path);

// Same format; additionally requires an "external:" source tag.
FeatureSequence load_external_embeddings(std::span<const std::uint8_t> bytes);
FeatureSequence load_external_embeddings_file(const std::filesystem::path& path);

}  // namespace dsu::features
