// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsu/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "dsu/error.hpp"
#include "dsu/rng.hpp"

namespace dsu::synth {

namespace {

std::vector<std::uint32_t> random_word(Rng& rng, const UnitCorpusConfig& cfg) {
    const std::size_t len = cfg.word_min + rng.index(cfg.word_max - cfg.word_min + 1);
    std::vector<std::uint32_t> word;
    while (word.size() < len) {
        const auto u = static_cast<std::uint32_t>(rng.index(cfg.base_k));
        if (word.empty() || word.back() != u) word.push_back(u);
    }
    return word;
}

}  // namespace

std::vector<vq::DsuSequence> unit_corpus(const UnitCorpusConfig& cfg, std::uint64_t seed) {
    require(cfg.base_k >= 2, ErrorCode::InvalidArgument, "synthetic corpus needs at least two units");
    require(cfg.word_min >= 1 && cfg.word_min <= cfg.word_max && cfg.words_min >= 1 && cfg.words_min <= cfg.words_max,
            ErrorCode::InvalidArgument, "invalid synthetic word length range");
    require(cfg.lexicon_size >= 1, ErrorCode::InvalidArgument, "synthetic lexicon is empty");
    require(cfg.run_p > 0.0 && cfg.run_p <= 1.0, ErrorCode::InvalidArgument, "run_p must be in (0, 1]");

    Rng lex_rng(derive_seed(seed, "synth.lexicon"));
    std::vector<std::vector<std::uint32_t>> lexicon;
    for (std::size_t i = 0; i < cfg.lexicon_size; ++i) lexicon.push_back(random_word(lex_rng, cfg));

    Rng rng(derive_seed(seed, "synth.utterances"));
    std::vector<vq::DsuSequence> out;
    for (std::size_t n = 0; n < cfg.utterances; ++n) {
        vq::DsuSequence z;
        z.k = cfg.base_k;
        z.frame_rate_hz = cfg.frame_rate_hz;
        z.source_id = "synth-" + std::to_string(n);
        const std::size_t words = cfg.words_min + rng.index(cfg.words_max - cfg.words_min + 1);
        for (std::size_t w = 0; w < words; ++w) {
            const std::vector<std::uint32_t> word =
                rng.uniform() < cfg.noise ? random_word(rng, cfg) : lexicon[rng.index(lexicon.size())];
            for (std::uint32_t u : word) {
                const std::size_t run = rng.geometric(cfg.run_p);
                z.units.insert(z.units.end(), run, u);
            }
        }
        out.push_back(std::move(z));
    }
    return out;
}

std::vector<vq::DsuSequence> bundled_unit_corpus() { return unit_corpus(UnitCorpusConfig{}, kBundledSeed); }

std::vector<features::FeatureSequence> blob_features(std::size_t sequences, std::size_t frames, std::size_t dim,
                                                     std::size_t centers, std::uint64_t seed) {
    require(sequences >= 1 && frames >= 1 && dim >= 1 && centers >= 1, ErrorCode::InvalidArgument,
            "blob corpus dimensions must be positive");
    Rng rng(seed);
    std::vector<float> means(centers * dim);
    for (auto& m : means) m = static_cast<float>(rng.uniform(-5.0, 5.0));
    std::vector<features::FeatureSequence> out;
    for (std::size_t s = 0; s < sequences; ++s) {
        std::vector<float> values(frames * dim);
        for (std::size_t t = 0; t < frames; ++t) {
            const std::size_t c = rng.index(centers);
            for (std::size_t d = 0; d < dim; ++d) {
                values[t * dim + d] = means[c * dim + d] + static_cast<float>(0.5 * rng.normal());
            }
        }
        out.emplace_back(std::move(values), dim, 50.0f, "external:blobs", "blob-" + std::to_string(s));
    }
    return out;
}

audio::Waveform tone_waveform(double seconds, std::uint64_t seed, std::string id) {
    require(seconds > 0.0, ErrorCode::InvalidArgument, "waveform duration must be positive");
    Rng rng(seed);
    const auto n = static_cast<std::size_t>(seconds * audio::kSampleRateHz);
    const std::size_t segment = audio::kSampleRateHz / 5;
    std::vector<float> samples(std::max<std::size_t>(n, 1));
    double freq = 0.0;
    double phase = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (i % segment == 0) freq = rng.uniform(150.0, 3000.0);
        phase += 2.0 * std::numbers::pi * freq / audio::kSampleRateHz;
        const double v = 0.5 * std::sin(phase) + 0.02 * rng.normal();
        samples[i] = static_cast<float>(std::clamp(v, -1.0, 1.0));
    }
    return audio::Waveform(std::move(samples), audio::kSampleRateHz, std::move(id));
}

}  // namespace dsu::synth
