// Copyright 2026 The dsu-toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dsu/binary.hpp"

#include <bit>
#include <fstream>
#include <iterator>

#include "dsu/error.hpp"

namespace dsu {

namespace {

template <typename U>
void put_le(Bytes& buf, U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

}  // namespace

void ByteWriter::put_u16(std::uint16_t v) { put_le(buf_, v); }
void ByteWriter::put_u32(std::uint32_t v) { put_le(buf_, v); }
void ByteWriter::put_u64(std::uint64_t v) { put_le(buf_, v); }
void ByteWriter::put_f32(float v) { put_le(buf_, std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::put_f64(double v) { put_le(buf_, std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::put_bytes(std::span<const std::uint8_t> bytes) {
    buf_.insert(buf_.end(), bytes.begin(), bytes.end());
}

void ByteWriter::put_tag(std::string_view tag) {
    for (char c : tag) buf_.push_back(static_cast<std::uint8_t>(c));
}

std::span<const std::uint8_t> ByteReader::take(std::size_t n) {
    if (n > remaining()) {
        raise(ErrorCode::CorruptFile, "unexpected end of data at offset " + std::to_string(pos_) + " (need " +
                                          std::to_string(n) + " bytes, have " + std::to_string(remaining()) + ")");
    }
    auto out = data_.subspan(pos_, n);
    pos_ += n;
    return out;
}

namespace {

template <typename U>
U get_le(std::span<const std::uint8_t> b) {
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
    return v;
}

}  // namespace

std::uint8_t ByteReader::u8() { return take(1)[0]; }
std::uint16_t ByteReader::u16() { return get_le<std::uint16_t>(take(2)); }
std::uint32_t ByteReader::u32() { return get_le<std::uint32_t>(take(4)); }
std::uint64_t ByteReader::u64() { return get_le<std::uint64_t>(take(8)); }
float ByteReader::f32() { return std::bit_cast<float>(u32()); }
double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::tag() {
    auto b = take(4);
    return std::string(b.begin(), b.end());
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorCode::Io, "cannot open " + path.string());
    Bytes data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) raise(ErrorCode::Io, "read failed: " + path.string());
    return data;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::Io, "cannot create " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) raise(ErrorCode::Io, "write failed: " + path.string());
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text_file(const std::filesystem::path& path) {
    auto bytes = read_file(path);
    return std::string(bytes.begin(), bytes.end());
}

}  // namespace dsu
