// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dsu/binary.hpp"

namespace dsu::audio {

inline constexpr int kSampleRateHz = 16000;

/// Mono 16 kHz waveform with samples normalized to [-1, 1).
///
/// Construction validates the invariants (rate, non-empty, range), so a
/// Waveform that exists is always usable by the feature extractors.
class Waveform {
public:
    Waveform(std::vector<float> samples, int sample_rate_hz, std::string source_id);

    std::span<const float> samples() const { return samples_; }
    std::size_t size() const { return samples_.size(); }
    int sample_rate_hz() const { return sample_rate_hz_; }
    const std::string& source_id() const { return source_id_; }

private:
    std::vector<float> samples_;
    int sample_rate_hz_;
    std::string source_id_;
};

// Parses a RIFF/WAVE container holding 16-bit PCM. Multi-channel input is
// down-mixed by averaging the normalized channel samples. Unknown chunks are
// skipped.
Waveform read_wav(std::span<const std::uint8_t> bytes, std::string source_id = {});
Waveform read_wav_file(const std::filesystem::path& path);

// Canonical 44-byte-header PCM16 writer. `interleaved` holds
// frames * channels samples.
Bytes write_wav_pcm16(std::span<const std::int16_t> interleaved, int channels, int sample_rate_hz);

std::int16_t to_pcm16(float sample);

std::size_t frame_count(std::size_t length, std::size_t frame_len, std::size_t hop);

// Views into the waveform; they stay valid while `w` lives. The trailing
// partial frame is dropped.
std::vector<std::span<const float>> frame_signal(const Waveform& w, std::size_t frame_len, std::size_t hop);

}  // namespace dsu::audio
