#include "treeduce/io.hpp"

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

namespace treeduce {

IoStats& IoStats::merge(const IoStats& other)
{
    bytes_requested += other.bytes_requested;
    bytes_fetched += other.bytes_fetched;
    fetch_calls += other.fetch_calls;
    read_time_s += other.read_time_s;
    return *this;
}

double IoStats::amplification() const
{
    return static_cast<double>(bytes_fetched) / static_cast<double>(std::max<std::uint64_t>(bytes_requested, 1));
}

namespace {

std::string errno_text(const std::string& what, const std::string& path)
{
    return what + " '" + path + "': " + std::strerror(errno);
}

void check_range(std::uint64_t offset, std::size_t length, std::uint64_t size)
{
    if (offset > size || length > size - offset)
        throw IoError("read past end of source: offset " + std::to_string(offset) + " length " +
                      std::to_string(length) + " size " + std::to_string(size));
}

}  // namespace

FileSource::FileSource(const std::filesystem::path& path) : path_(path.string())
{
    fd_ = ::open(path_.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd_ < 0)
        throw IoError(errno_text("cannot open", path_));
    struct stat st{};
    if (::fstat(fd_, &st) != 0) {
        auto msg = errno_text("cannot stat", path_);
        ::close(fd_);
        throw IoError(msg);
    }
    size_ = static_cast<std::uint64_t>(st.st_size);
}

FileSource::~FileSource()
{
    if (fd_ >= 0)
        ::close(fd_);
}

void FileSource::read_at(std::uint64_t offset, std::span<std::uint8_t> out)
{
    check_range(offset, out.size(), size_);
    auto start = std::chrono::steady_clock::now();
    std::size_t done = 0;
    while (done < out.size()) {
        auto n = ::pread(fd_, out.data() + done, out.size() - done, static_cast<off_t>(offset + done));
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw IoError(errno_text("read failed on", path_));
        }
        if (n == 0)
            throw IoError("unexpected end of file in '" + path_ + "'");
        done += static_cast<std::size_t>(n);
    }
    auto elapsed = std::chrono::steady_clock::now() - start;
    bytes_ += out.size();
    calls_ += 1;
    nanos_ += static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(elapsed).count());
}

IoStats FileSource::stats() const
{
    IoStats s;
    s.bytes_requested = bytes_.load();
    s.bytes_fetched = s.bytes_requested;
    s.fetch_calls = calls_.load();
    s.read_time_s = static_cast<double>(nanos_.load()) * 1e-9;
    return s;
}

void MemorySource::read_at(std::uint64_t offset, std::span<std::uint8_t> out)
{
    check_range(offset, out.size(), data_.size());
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(offset), out.size(), out.begin());
    bytes_ += out.size();
    calls_ += 1;
}

IoStats MemorySource::stats() const
{
    IoStats s;
    s.bytes_requested = bytes_.load();
    s.bytes_fetched = s.bytes_requested;
    s.fetch_calls = calls_.load();
    return s;
}

void VectorSink::write(std::span<const std::uint8_t> data)
{
    data_.insert(data_.end(), data.begin(), data.end());
}

void VectorSink::write_at(std::uint64_t offset, std::span<const std::uint8_t> data)
{
    if (offset + data.size() > data_.size())
        throw IoError("patch beyond end of sink");
    std::copy(data.begin(), data.end(), data_.begin() + static_cast<std::ptrdiff_t>(offset));
}

FileSink::FileSink(const std::filesystem::path& path) : path_(path.string())
{
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd_ < 0)
        throw IoError(errno_text("cannot create", path_));
}

FileSink::~FileSink()
{
    if (fd_ >= 0)
        ::close(fd_);
}

namespace {

void pwrite_all(int fd, std::span<const std::uint8_t> data, std::uint64_t offset, const std::string& path)
{
    std::size_t done = 0;
    while (done < data.size()) {
        auto n = ::pwrite(fd, data.data() + done, data.size() - done, static_cast<off_t>(offset + done));
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw IoError(errno_text("write failed on", path));
        }
        done += static_cast<std::size_t>(n);
    }
}

}  // namespace

void FileSink::write(std::span<const std::uint8_t> data)
{
    pwrite_all(fd_, data, pos_, path_);
    pos_ += data.size();
}

void FileSink::write_at(std::uint64_t offset, std::span<const std::uint8_t> data)
{
    if (offset + data.size() > pos_)
        throw IoError("patch beyond end of '" + path_ + "'");
    pwrite_all(fd_, data, offset, path_);
}

}  // namespace treeduce
