// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <functional>
#include <vector>

#include "dsu/audio_io.hpp"
#include "dsu/binary.hpp"
#include "dsu/error.hpp"
#include "dsu/rng.hpp"

using namespace dsu;
using namespace dsu::audio;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::Io;
}

Bytes header_with(std::uint16_t format, std::uint16_t channels, std::uint32_t rate, std::uint16_t bits,
                  std::span<const std::uint8_t> payload) {
    ByteWriter w;
    w.put_tag("RIFF");
    w.put_u32(static_cast<std::uint32_t>(36 + payload.size()));
    w.put_tag("WAVE");
    w.put_tag("fmt ");
    w.put_u32(16);
    w.put_u16(format);
    w.put_u16(channels);
    w.put_u32(rate);
    w.put_u32(rate * channels * bits / 8);
    w.put_u16(static_cast<std::uint16_t>(channels * bits / 8));
    w.put_u16(bits);
    w.put_tag("data");
    w.put_u32(static_cast<std::uint32_t>(payload.size()));
    w.put_bytes(payload);
    return std::move(w).take();
}

}  // namespace

TEST_CASE("one second of mono PCM16 gives 16000 samples") {
    std::vector<std::int16_t> pcm(16000, 1000);
    const Waveform w = read_wav(write_wav_pcm16(pcm, 1, 16000), "x");
    CHECK(w.size() == 16000);
    CHECK(w.sample_rate_hz() == 16000);
    CHECK(w.source_id() == "x");
    CHECK(w.samples()[0] == doctest::Approx(1000.0 / 32768.0));
}

TEST_CASE("all-zero payload decodes to exact zeros") {
    std::vector<std::int16_t> pcm(800, 0);
    const Waveform w = read_wav(write_wav_pcm16(pcm, 1, 16000));
    for (float s : w.samples()) CHECK(s == 0.0f);
}

TEST_CASE("stereo is averaged to mono") {
    std::vector<std::int16_t> pcm;
    for (int i = 0; i < 100; ++i) {
        pcm.push_back(16384);
        pcm.push_back(-16384);
    }
    const Waveform w = read_wav(write_wav_pcm16(pcm, 2, 16000));
    CHECK(w.size() == 100);
    for (float s : w.samples()) CHECK(s == 0.0f);
}

TEST_CASE("PCM16 round trip is lossless at the integer level") {
    Rng rng(3);
    std::vector<std::int16_t> pcm(5000);
    for (auto& s : pcm) s = static_cast<std::int16_t>(static_cast<int>(rng.index(65536)) - 32768);
    const Waveform w = read_wav(write_wav_pcm16(pcm, 1, 16000));
    REQUIRE(w.size() == pcm.size());
    for (std::size_t i = 0; i < pcm.size(); ++i) {
        REQUIRE(w.samples()[i] >= -1.0f);
        REQUIRE(w.samples()[i] <= 1.0f);
        REQUIRE(to_pcm16(w.samples()[i]) == pcm[i]);
    }
}

TEST_CASE("unknown chunks before data are skipped") {
    std::vector<std::int16_t> pcm(10, 7);
    const Bytes plain = write_wav_pcm16(pcm, 1, 16000);
    ByteWriter w;
    w.put_bytes(std::span(plain).first(36));
    w.put_tag("LIST");
    w.put_u32(3);
    w.put_tag("abc");
    w.put_u8(0);  // pad byte
    w.put_bytes(std::span(plain).subspan(36));
    const Waveform wave = read_wav(std::move(w).take());
    CHECK(wave.size() == 10);
}

TEST_CASE("format errors") {
    std::vector<std::uint8_t> payload(32, 0);
    CHECK(code_of([&] { read_wav(header_with(3, 1, 16000, 32, payload)); }) == ErrorCode::UnsupportedFormat);
    CHECK(code_of([&] { read_wav(header_with(1, 1, 16000, 8, payload)); }) == ErrorCode::UnsupportedFormat);
    CHECK(code_of([&] { read_wav(header_with(1, 1, 44100, 16, payload)); }) == ErrorCode::SampleRateMismatch);

    Bytes truncated = header_with(1, 1, 16000, 16, payload);
    truncated.resize(truncated.size() - 5);
    CHECK(code_of([&] { read_wav(truncated); }) == ErrorCode::CorruptFile);

    std::vector<std::uint8_t> odd(3, 0);
    CHECK(code_of([&] { read_wav(header_with(1, 1, 16000, 16, odd)); }) == ErrorCode::CorruptFile);

    Bytes not_riff = header_with(1, 1, 16000, 16, payload);
    not_riff[0] = 'X';
    CHECK(code_of([&] { read_wav(not_riff); }) == ErrorCode::UnsupportedFormat);
    CHECK(code_of([&] { read_wav(std::vector<std::uint8_t>(5, 0)); }) == ErrorCode::CorruptFile);
    CHECK(code_of([&] { read_wav(header_with(1, 1, 16000, 16, {})); }) == ErrorCode::EmptyInput);
}

TEST_CASE("waveform rejects other sample rates") {
    CHECK(code_of([] { Waveform({0.0f}, 8000, ""); }) == ErrorCode::SampleRateMismatch);
    CHECK(code_of([] { Waveform({}, 16000, ""); }) == ErrorCode::EmptyInput);
}

TEST_CASE("frame count examples") {
    CHECK(frame_count(16000, 400, 160) == 98);
    CHECK(frame_count(399, 400, 160) == 0);
    CHECK(frame_count(400, 400, 160) == 1);
    CHECK(code_of([] { frame_count(10, 0, 1); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("frame count matches a brute-force slicer") {
    Rng rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t len = rng.index(3000);
        const std::size_t frame = 1 + rng.index(500);
        const std::size_t hop = 1 + rng.index(300);
        std::size_t brute = 0;
        for (std::size_t start = 0; start + frame <= len; start += hop) ++brute;
        REQUIRE(frame_count(len, frame, hop) == brute);
    }
}

TEST_CASE("frame_signal drops the trailing partial frame") {
    std::vector<float> s(1000);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = float(i) / 1000.0f;
    const Waveform w(s, 16000, "");
    const auto frames = frame_signal(w, 400, 160);
    REQUIRE(frames.size() == 4);
    CHECK(frames[3].size() == 400);
    CHECK(frames[3][0] == s[480]);
}
