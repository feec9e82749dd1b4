// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsu/audio_io.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "dsu/error.hpp"

namespace dsu::audio {

namespace {

constexpr std::uint16_t kFormatPcm = 0x0001;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct FmtChunk {
    std::uint16_t format_tag = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t block_align = 0;
    std::uint16_t bits_per_sample = 0;
};

FmtChunk parse_fmt(std::span<const std::uint8_t> body) {
    ByteReader r(body);
    FmtChunk fmt;
    fmt.format_tag = r.u16();
    fmt.channels = r.u16();
    fmt.sample_rate = r.u32();
    r.skip(4);  // byte rate
    fmt.block_align = r.u16();
    fmt.bits_per_sample = r.u16();
    if (fmt.format_tag == kFormatExtensible) {
        // cbSize, valid bits, channel mask, then the sub-format GUID whose
        // first two bytes carry the real format tag.
        if (r.remaining() < 2 + 2 + 4 + 16) raise(ErrorCode::CorruptFile, "truncated WAVE_FORMAT_EXTENSIBLE fmt chunk");
        r.skip(2 + 2 + 4);
        fmt.format_tag = r.u16();
    }
    return fmt;
}

}  // namespace

Waveform::Waveform(std::vector<float> samples, int sample_rate_hz, std::string source_id)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz), source_id_(std::move(source_id)) {
    require(sample_rate_hz_ == kSampleRateHz, ErrorCode::SampleRateMismatch,
            "expected " + std::to_string(kSampleRateHz) + " Hz, got " + std::to_string(sample_rate_hz_));
    require(!samples_.empty(), ErrorCode::EmptyInput, "waveform has no samples");
    for (float s : samples_) {
        require(std::isfinite(s) && s >= -1.0f && s <= 1.0f, ErrorCode::InvalidArgument,
                "waveform sample outside [-1, 1]");
    }
}

Waveform read_wav(std::span<const std::uint8_t> bytes, std::string source_id) {
    ByteReader r(bytes);
    if (r.remaining() < 12) raise(ErrorCode::CorruptFile, "file shorter than a RIFF header");
    if (r.tag() != "RIFF") raise(ErrorCode::UnsupportedFormat, "missing RIFF magic");
    r.u32();  // riff size; some writers get it wrong, chunks are trusted instead
    if (r.tag() != "WAVE") raise(ErrorCode::UnsupportedFormat, "RIFF form type is not WAVE");

    std::optional<FmtChunk> fmt;
    std::optional<std::span<const std::uint8_t>> data;
    while (!r.at_end() && !data) {
        if (r.remaining() < 8) raise(ErrorCode::CorruptFile, "truncated chunk header");
        const std::string id = r.tag();
        const std::uint32_t size = r.u32();
        if (size > r.remaining()) raise(ErrorCode::CorruptFile, "chunk '" + id + "' runs past end of file");
        auto body = r.take(size);
        if (size % 2 == 1 && !r.at_end()) r.skip(1);  // RIFF word alignment
        if (id == "fmt ") {
            fmt = parse_fmt(body);
        } else if (id == "data") {
            data = body;
        }
    }
    if (!fmt) raise(ErrorCode::CorruptFile, "no fmt chunk before data");
    if (!data) raise(ErrorCode::CorruptFile, "no data chunk");
    if (fmt->format_tag != kFormatPcm || fmt->bits_per_sample != 16) {
        raise(ErrorCode::UnsupportedFormat, "only 16-bit PCM is supported (format tag " +
                                                std::to_string(fmt->format_tag) + ", " +
                                                std::to_string(fmt->bits_per_sample) + " bits)");
    }
    if (fmt->channels == 0) raise(ErrorCode::CorruptFile, "fmt chunk declares zero channels");
    if (fmt->sample_rate != static_cast<std::uint32_t>(kSampleRateHz)) {
        raise(ErrorCode::SampleRateMismatch, "expected 16000 Hz, file is " + std::to_string(fmt->sample_rate) + " Hz");
    }

    const std::size_t channels = fmt->channels;
    const std::size_t frame_bytes = 2 * channels;
    if (data->size() % frame_bytes != 0) raise(ErrorCode::CorruptFile, "data chunk ends mid-frame");
    const std::size_t n = data->size() / frame_bytes;

    std::vector<float> samples(n);
    ByteReader pcm(*data);
    for (std::size_t i = 0; i < n; ++i) {
        float acc = 0.0f;
        for (std::size_t c = 0; c < channels; ++c) {
            acc += static_cast<float>(static_cast<std::int16_t>(pcm.u16())) / 32768.0f;
        }
        samples[i] = channels == 1 ? acc : acc / static_cast<float>(channels);
    }
    return Waveform(std::move(samples), kSampleRateHz, std::move(source_id));
}

Waveform read_wav_file(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    try {
        return read_wav(bytes, path.stem().string());
    } catch (const Error& e) {
        throw e.with_context(path.string());
    }
}

Bytes write_wav_pcm16(std::span<const std::int16_t> interleaved, int channels, int sample_rate_hz) {
    require(channels >= 1, ErrorCode::InvalidArgument, "channels must be >= 1");
    require(interleaved.size() % static_cast<std::size_t>(channels) == 0, ErrorCode::InvalidArgument,
            "sample count is not a multiple of the channel count");
    const auto data_bytes = static_cast<std::uint32_t>(interleaved.size() * 2);
    const auto block_align = static_cast<std::uint16_t>(2 * channels);

    ByteWriter w;
    w.put_tag("RIFF");
    w.put_u32(36 + data_bytes);
    w.put_tag("WAVE");
    w.put_tag("fmt ");
    w.put_u32(16);
    w.put_u16(kFormatPcm);
    w.put_u16(static_cast<std::uint16_t>(channels));
    w.put_u32(static_cast<std::uint32_t>(sample_rate_hz));
    w.put_u32(static_cast<std::uint32_t>(sample_rate_hz) * block_align);
    w.put_u16(block_align);
    w.put_u16(16);
    w.put_tag("data");
    w.put_u32(data_bytes);
    for (std::int16_t s : interleaved) w.put_u16(static_cast<std::uint16_t>(s));
    return std::move(w).take();
}

std::int16_t to_pcm16(float sample) {
    const float scaled = std::round(std::clamp(sample, -1.0f, 1.0f) * 32768.0f);
    return static_cast<std::int16_t>(std::clamp(scaled, -32768.0f, 32767.0f));
}

std::size_t frame_count(std::size_t length, std::size_t frame_len, std::size_t hop) {
    require(frame_len >= 1 && hop >= 1, ErrorCode::InvalidArgument, "frame_len and hop must be >= 1");
    if (length < frame_len) return 0;
    return (length - frame_len) / hop + 1;
}

std::vector<std::span<const float>> frame_signal(const Waveform& w, std::size_t frame_len, std::size_t hop) {
    const std::size_t n = frame_count(w.size(), frame_len, hop);
    std::vector<std::span<const float>> frames;
    frames.reserve(n);
    for (std::size_t i = 0; i < n; ++i) frames.push_back(w.samples().subspan(i * hop, frame_len));
    return frames;
}

}  // namespace dsu::audio
