// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dsu/audio_io.hpp"
#include "dsu/features.hpp"
#include "dsu/vq.hpp"

namespace dsu::synth {

/// Knobs for the seeded DSU corpus. Utterances are sequences of "words" drawn
/// from a fixed lexicon of unit strings; every unit is held for a
/// geometric(run_p) number of frames, so both run collapsing and pair
/// merging have something to find.
struct UnitCorpusConfig {
    std::size_t utterances = 20;
    std::uint32_t base_k = 1000;
    std::size_t lexicon_size = 20;
    std::size_t word_min = 2;
    std::size_t word_max = 2;
    std::size_t words_min = 30;
    std::size_t words_max = 60;
    double run_p = 0.5;
    double noise = 0.9;  // chance a word is replaced by fresh random units
    double frame_rate_hz = 50.0;
};

std::vector<vq::DsuSequence> unit_corpus(const UnitCorpusConfig& cfg, std::uint64_t seed);

// The frozen 20-utterance fixture (seed 20240917).
std::vector<vq::DsuSequence> bundled_unit_corpus();
inline constexpr std::uint64_t kBundledSeed = 20240917;

// Isotropic Gaussian blobs, `frames` rows per sequence.
std::vector<features::FeatureSequence> blob_features(std::size_t sequences, std::size_t frames, std::size_t dim,
                                                     std::size_t centers, std::uint64_t seed);

// A few seconds of stepped tones plus noise at 16 kHz.
audio::Waveform tone_waveform(double seconds, std::uint64_t seed, std::string id);

}  // namespace dsu::synth
