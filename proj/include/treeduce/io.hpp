#pragma once

#include "treeduce/bytes.hpp"

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>

namespace treeduce {

/// Byte and time accounting for a byte source. Aggregated across workers with
/// merge(); never shared between threads while being updated.
struct IoStats
{
    std::uint64_t bytes_requested = 0;  ///< sum of caller-requested lengths
    std::uint64_t bytes_fetched = 0;    ///< bytes moved from the backing store
    std::uint64_t fetch_calls = 0;
    double read_time_s = 0.0;           ///< wall time spent inside fetches

    IoStats& merge(const IoStats& other);
    [[nodiscard]] double amplification() const;
};

class IoError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Random-access, read-only byte source with a known total length.
class ByteSource
{
public:
    virtual ~ByteSource() = default;

    [[nodiscard]] virtual std::uint64_t size() const = 0;

    /// Fills `out` with bytes [offset, offset + out.size()). Throws IoError when
    /// the range runs past size() or the backing store fails.
    virtual void read_at(std::uint64_t offset, std::span<std::uint8_t> out) = 0;

    [[nodiscard]] virtual IoStats stats() const = 0;

    Bytes read(std::uint64_t offset, std::size_t length)
    {
        Bytes b(length);
        read_at(offset, b);
        return b;
    }
};

/// pread(2)-backed local file. Positioned reads are safe from many threads.
class FileSource final : public ByteSource
{
public:
    explicit FileSource(const std::filesystem::path& path);
    ~FileSource() override;
    FileSource(const FileSource&) = delete;
    FileSource& operator=(const FileSource&) = delete;

    [[nodiscard]] std::uint64_t size() const override { return size_; }
    void read_at(std::uint64_t offset, std::span<std::uint8_t> out) override;
    [[nodiscard]] IoStats stats() const override;

private:
    int fd_ = -1;
    std::uint64_t size_ = 0;
    std::string path_;
    std::atomic<std::uint64_t> bytes_{0};
    std::atomic<std::uint64_t> calls_{0};
    std::atomic<std::uint64_t> nanos_{0};
};

class MemorySource final : public ByteSource
{
public:
    explicit MemorySource(Bytes data) : data_(std::move(data)) {}

    [[nodiscard]] std::uint64_t size() const override { return data_.size(); }
    void read_at(std::uint64_t offset, std::span<std::uint8_t> out) override;
    [[nodiscard]] IoStats stats() const override;

private:
    Bytes data_;
    std::atomic<std::uint64_t> bytes_{0};
    std::atomic<std::uint64_t> calls_{0};
};

/// Sequential sink that can patch bytes it has already written.
class ByteSink
{
public:
    virtual ~ByteSink() = default;
    virtual void write(std::span<const std::uint8_t> data) = 0;
    virtual void write_at(std::uint64_t offset, std::span<const std::uint8_t> data) = 0;
    [[nodiscard]] virtual std::uint64_t position() const = 0;
};

class VectorSink final : public ByteSink
{
public:
    void write(std::span<const std::uint8_t> data) override;
    void write_at(std::uint64_t offset, std::span<const std::uint8_t> data) override;
    [[nodiscard]] std::uint64_t position() const override { return data_.size(); }

    [[nodiscard]] const Bytes& data() const { return data_; }
    Bytes take() { return std::move(data_); }

private:
    Bytes data_;
};

class FileSink final : public ByteSink
{
public:
    explicit FileSink(const std::filesystem::path& path);
    ~FileSink() override;
    FileSink(const FileSink&) = delete;
    FileSink& operator=(const FileSink&) = delete;

    void write(std::span<const std::uint8_t> data) override;
    void write_at(std::uint64_t offset, std::span<const std::uint8_t> data) override;
    [[nodiscard]] std::uint64_t position() const override { return pos_; }

private:
    int fd_ = -1;
    std::uint64_t pos_ = 0;
    std::string path_;
};

}  // namespace treeduce
