// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include "dsu/audio_io.hpp"
#include "dsu/error.hpp"
#include "dsu/features.hpp"
#include "dsu/rng.hpp"
#include "oracles/oracles.hpp"

using namespace dsu;
using namespace dsu::features;

namespace {

audio::Waveform sine(double hz, std::size_t n, double amp = 0.5) {
    std::vector<float> s(n);
    for (std::size_t i = 0; i < n; ++i) s[i] = float(amp * std::sin(2.0 * std::numbers::pi * hz * double(i) / 16000.0));
    return audio::Waveform(std::move(s), 16000, "sine");
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::Io;
}

}  // namespace

TEST_CASE("mel scale round trip") {
    for (double hz : {0.0, 100.0, 1000.0, 8000.0}) CHECK(mel_to_hz(hz_to_mel(hz)) == doctest::Approx(hz));
    CHECK(hz_to_mel(700.0) == doctest::Approx(2595.0 * std::log10(2.0)));
}

TEST_CASE("dct matrix is orthonormal") {
    const auto m = dct_matrix(26, 26);
    for (std::size_t i = 0; i < 26; ++i) {
        for (std::size_t j = 0; j < 26; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < 26; ++k) dot += m[i][k] * m[j][k];
            REQUIRE(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-10);
        }
    }
}

TEST_CASE("power spectrum matches the direct DFT") {
    MfccConfig cfg;
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<float> frame(400);
        for (auto& s : frame) s = float(rng.uniform(-1.0, 1.0));
        const auto fast = power_spectrum(frame, cfg);
        const auto slow = oracle::dft_power(oracle::windowed(frame, cfg.preemphasis, cfg.fft_size));
        REQUIRE(fast.size() == slow.size());
        double peak = 0.0;
        for (double v : slow) peak = std::max(peak, v);
        for (std::size_t k = 0; k < fast.size(); ++k) {
            REQUIRE(std::abs(fast[k] - slow[k]) <= 1e-6 * std::max(slow[k], 1e-6 * peak));
        }
    }
}

TEST_CASE("filterbank rows are nonnegative and cover the band") {
    MfccConfig cfg;
    const auto fb = mel_filterbank(cfg, 16000);
    REQUIRE(fb.size() == cfg.n_mels);
    const double lo = hz_to_mel(cfg.mel_low_hz);
    const double hi = hz_to_mel(cfg.mel_high_hz);
    for (std::size_t k = 0; k < fb[0].size(); ++k) {
        double total = 0.0;
        for (const auto& row : fb) {
            REQUIRE(row[k] >= 0.0);
            REQUIRE(row[k] <= 1.0);
            total += row[k];
        }
        const double mel = hz_to_mel(double(k) * 16000.0 / double(cfg.fft_size));
        if (mel > lo && mel < hi) CHECK(total > 0.0);
        if (mel < lo || mel > hi) CHECK(total == 0.0);
    }
}

TEST_CASE("1 kHz sine peaks in the filter centred nearest 1 kHz") {
    MfccConfig cfg;
    const auto fb = mel_filterbank(cfg, 16000);
    const double lo = hz_to_mel(cfg.mel_low_hz);
    const double step = (hz_to_mel(cfg.mel_high_hz) - lo) / double(cfg.n_mels + 1);
    std::size_t nearest = 0;
    for (std::size_t m = 1; m < cfg.n_mels; ++m) {
        if (std::abs(mel_to_hz(lo + step * double(m + 1)) - 1000.0) <
            std::abs(mel_to_hz(lo + step * double(nearest + 1)) - 1000.0)) {
            nearest = m;
        }
    }

    const auto w = sine(1000.0, 400);
    const auto power = oracle::dft_power(oracle::windowed(w.samples(), cfg.preemphasis, cfg.fft_size));
    std::vector<double> energy(cfg.n_mels, 0.0);
    for (std::size_t m = 0; m < cfg.n_mels; ++m)
        for (std::size_t k = 0; k < power.size(); ++k) energy[m] += fb[m][k] * power[k];
    const auto top = std::size_t(std::max_element(energy.begin(), energy.end()) - energy.begin());
    CHECK(top == nearest);

    const auto logmel = log_mel_energies(w, cfg);
    REQUIRE(logmel.size() == 1);
    const auto top_lib = std::size_t(std::max_element(logmel[0].begin(), logmel[0].end()) - logmel[0].begin());
    CHECK(top_lib == nearest);
}

TEST_CASE("mfcc shape, rate and frame count") {
    const auto f = mfcc(sine(440.0, 16000));
    CHECK(f.dim() == 39);
    CHECK(f.num_frames() == 98);
    CHECK(f.frame_rate_hz() == doctest::Approx(100.0));
    CHECK(f.source() == "mfcc");
    CHECK(f.source_id() == "sine");
}

TEST_CASE("silence gives identical frames equal to the DCT of the floor") {
    MfccConfig cfg;
    const audio::Waveform w(std::vector<float>(16000, 0.0f), 16000, "z");
    const auto f = mfcc(w, cfg);
    const auto dct = dct_matrix(cfg.n_ceps, cfg.n_mels);
    const double floor_log = std::log(cfg.log_floor);
    for (std::size_t t = 0; t < f.num_frames(); ++t) {
        for (std::size_t k = 0; k < cfg.n_ceps; ++k) {
            double expect = 0.0;
            for (std::size_t m = 0; m < cfg.n_mels; ++m) expect += dct[k][m] * floor_log;
            REQUIRE(f.frame(t)[k] == doctest::Approx(expect).epsilon(1e-6));
        }
        for (std::size_t k = cfg.n_ceps; k < 39; ++k) REQUIRE(f.frame(t)[k] == 0.0f);
    }
}

TEST_CASE("mfcc stays finite on random input") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<float> s(2000);
        const double amp = std::pow(10.0, -rng.uniform(0.0, 8.0));
        for (auto& v : s) v = float(amp * rng.uniform(-1.0, 1.0));
        const auto f = mfcc(audio::Waveform(std::move(s), 16000, ""));
        for (float v : f.values()) REQUIRE(std::isfinite(v));
    }
}

TEST_CASE("short waveform is an empty-features error") {
    CHECK(code_of([] { mfcc(sine(100.0, 399)); }) == ErrorCode::EmptyFeatures);
}

TEST_CASE("deltas") {
    SUBCASE("constant sequence") {
        const FeatureSequence f(std::vector<float>(20, 3.0f), 2, 100.0f, "x", "");
        const auto d = deltas(f, 2);
        for (float v : d.values()) CHECK(v == 0.0f);
    }
    SUBCASE("ramp has unit slope away from the edges") {
        std::vector<float> ramp(10);
        for (std::size_t t = 0; t < 10; ++t) ramp[t] = float(t);
        const auto d = deltas(FeatureSequence(ramp, 1, 100.0f, "x", ""), 2);
        for (std::size_t t = 2; t + 2 < 10; ++t) CHECK(d.frame(t)[0] == doctest::Approx(1.0));
    }
    SUBCASE("single frame") {
        const auto d = deltas(FeatureSequence({1.0f, 2.0f}, 2, 100.0f, "x", ""), 2);
        CHECK(d.values()[0] == 0.0f);
        CHECK(d.values()[1] == 0.0f);
    }
}

TEST_CASE("feature file round trip and errors") {
    Rng rng(5);
    std::vector<float> v(10 * 39);
    for (auto& x : v) x = float(rng.normal());
    const FeatureSequence f(v, 39, 100.0f, "mfcc", "");
    const Bytes bytes = write_features(f);
    CHECK(read_features(bytes) == f);

    Bytes bad = bytes;
    bad[0] = 'X';
    CHECK(code_of([&] { read_features(bad); }) == ErrorCode::CorruptFile);

    Bytes short_payload = bytes;
    short_payload.resize(short_payload.size() - 39 * 4);
    CHECK(code_of([&] { read_features(short_payload); }) == ErrorCode::CorruptFile);

    ByteWriter w;
    w.put_tag("DSUF");
    w.put_u32(1);
    w.put_u32(0);
    w.put_u32(39);
    w.put_f32(100.0f);
    w.put_u8(0);
    CHECK(code_of([&] { read_features(std::move(w).take()); }) == ErrorCode::EmptyFeatures);
}

TEST_CASE("external embeddings need an external source tag") {
    const FeatureSequence ext(std::vector<float>(8, 0.5f), 4, 50.0f, "external:wavlm/21", "");
    CHECK(load_external_embeddings(write_features(ext)).frame_rate_hz() == 50.0f);
    const FeatureSequence own(std::vector<float>(4, 0.5f), 4, 100.0f, "mfcc", "");
    CHECK(code_of([&] { load_external_embeddings(write_features(own)); }) == ErrorCode::UnsupportedFormat);
}
