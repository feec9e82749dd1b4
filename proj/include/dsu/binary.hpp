// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dsu {

using Bytes = std::vector<std::uint8_t>;

// Little-endian serializer used by all binary artifact formats.
class ByteWriter {
public:
    void put_u8(std::uint8_t v) { buf_.push_back(v); }
    void put_u16(std::uint16_t v);
    void put_u32(std::uint32_t v);
    void put_u64(std::uint64_t v);
    void put_f32(float v);
    void put_f64(double v);
    void put_bytes(std::span<const std::uint8_t> bytes);
    void put_tag(std::string_view tag);  // four-character code, no length

    const Bytes& bytes() const& { return buf_; }
    Bytes take() && { return std::move(buf_); }

private:
    Bytes buf_;
};

// Bounds-checked reader; every overrun raises CorruptFile.
class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    double f64();
    std::span<const std::uint8_t> take(std::size_t n);
    std::string tag();  // reads four bytes

    std::size_t remaining() const { return data_.size() - pos_; }
    std::size_t position() const { return pos_; }
    bool at_end() const { return pos_ == data_.size(); }
    void skip(std::size_t n) { take(n); }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace dsu
