#include "treeduce/xrdlite.hpp"

#include <algorithm>
#include <cstring>

namespace treeduce::xrdl {

ReadAheadSource::ReadAheadSource(std::unique_ptr<Client> client, RemoteFile file, ConnectorConfig config)
    : client_(std::move(client)), file_(file), config_(config)
{
    if (config_.read_ahead == 0)
        config_.read_ahead = 1;
    if (config_.max_cache_windows == 0)
        config_.max_cache_windows = 1;
}

ReadAheadSource::~ReadAheadSource()
{
    try {
        client_->close(file_.handle);
    } catch (...) {
    }
}

void ReadAheadSource::read_at(std::uint64_t offset, std::span<std::uint8_t> out)
{
    const auto len = out.size();
    if (offset > file_.size || len > file_.size - offset)
        throw IoError("read beyond end of remote file: offset " + std::to_string(offset) + " length " +
                      std::to_string(len) + " size " + std::to_string(file_.size));
    stats_.bytes_requested += len;
    if (len == 0)
        return;

    for (auto it = windows_.begin(); it != windows_.end(); ++it) {
        if (offset >= it->offset && offset + len <= it->offset + it->data.size()) {
            std::memcpy(out.data(), it->data.data() + (offset - it->offset), len);
            windows_.splice(windows_.begin(), windows_, it);
            return;
        }
    }

    auto t0 = std::chrono::steady_clock::now();
    const auto want = std::min<std::uint64_t>(std::max<std::uint64_t>(len, config_.read_ahead), file_.size - offset);
    Window w{offset, Bytes(want)};
    std::uint64_t got = 0;
    while (got < want) {
        auto step = std::min<std::uint64_t>(want - got, kMaxReadLength);
        auto n = client_->read(file_.handle, offset + got, std::span(w.data).subspan(got, step));
        if (n == 0)
            throw IoError("remote file shrank during read");
        got += n;
    }
    stats_.fetch_calls += 1;
    stats_.bytes_fetched += want;
    stats_.read_time_s += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::memcpy(out.data(), w.data.data(), len);
    windows_.push_front(std::move(w));
    while (windows_.size() > config_.max_cache_windows)
        windows_.pop_back();
}

std::unique_ptr<ReadAheadSource> connector_open(const std::string& host, std::uint16_t port, const std::string& path,
                                                ConnectorConfig config)
{
    auto client = std::make_unique<Client>(host, port);
    auto file = client->open(path);
    return std::make_unique<ReadAheadSource>(std::move(client), file, config);
}

std::unique_ptr<ReadAheadSource> connector_open(const Url& url, ConnectorConfig config)
{
    return connector_open(url.host, url.port, url.path, config);
}

}  // namespace treeduce::xrdl
