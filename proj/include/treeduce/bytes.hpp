#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace treeduce {

using Bytes = std::vector<std::uint8_t>;

/// Appends big-endian encoded values to a growable buffer.
class ByteWriter
{
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v);
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f32(float v);
    void f64(double v);
    void bytes(std::span<const std::uint8_t> b);
    /// u16 length prefix followed by the raw bytes; throws if longer than 65535.
    void str16(std::string_view s);

    void reserve(std::size_t n) { buf_.reserve(n); }
    [[nodiscard]] std::size_t size() const { return buf_.size(); }
    [[nodiscard]] const Bytes& data() const { return buf_; }
    [[nodiscard]] Bytes take() { return std::move(buf_); }

private:
    Bytes buf_;
};

/// Bounds-checked big-endian cursor over a byte span. Every accessor throws
/// ByteReader::Underflow when fewer bytes remain than requested.
class ByteReader
{
public:
    struct Underflow
    {
        std::size_t position;
        std::size_t wanted;
    };

    explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

    std::uint8_t u8();
    std::uint16_t u16();
    std::uint32_t u32();
    std::uint64_t u64();
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    float f32();
    double f64();
    std::span<const std::uint8_t> bytes(std::size_t n);
    std::string str16();

    [[nodiscard]] std::size_t position() const { return pos_; }
    [[nodiscard]] std::size_t remaining() const { return data_.size() - pos_; }
    [[nodiscard]] bool at_end() const { return pos_ == data_.size(); }

private:
    void need(std::size_t n) const;

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

}  // namespace treeduce
