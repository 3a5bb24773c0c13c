#include "socket_util.hpp"

#include "treeduce/xrdlite.hpp"

#include <algorithm>
#include <arpa/inet.h>
#include <cstring>
#include <fcntl.h>
#include <map>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/stat.h>

namespace treeduce::xrdl {

using detail::recv_all;
using detail::send_all;

namespace fs = std::filesystem;

struct Server::Connection
{
    struct OpenFile
    {
        int fd;
        std::uint64_t size;
    };

    int fd = -1;
    std::thread thread;
    std::atomic<bool> done{false};
    std::map<std::uint32_t, OpenFile> files;
    std::uint32_t next_handle = 1;

    ~Connection()
    {
        for (auto& [h, f] : files)
            ::close(f.fd);
        if (fd >= 0)
            ::close(fd);
    }
};

namespace {

/// Resolves `relative` strictly inside `root` (already canonical). Returns an
/// empty path for anything that escapes the root or is not a regular file.
fs::path resolve_inside(const fs::path& root, const std::string& relative)
{
    if (relative.empty() || relative.find('\0') != std::string::npos)
        return {};
    fs::path rel(relative);
    if (rel.is_absolute())
        return {};
    std::error_code ec;
    auto candidate = fs::weakly_canonical(root / rel, ec);
    if (ec)
        return {};
    auto [root_end, cand_it] = std::mismatch(root.begin(), root.end(), candidate.begin(), candidate.end());
    if (root_end != root.end() || cand_it == candidate.end())
        return {};
    if (!fs::is_regular_file(candidate, ec))
        return {};
    return candidate;
}

bool send_status(int fd, Status s)
{
    return send_all(fd, encode_response_header(s, 0));
}

}  // namespace

Server::Server(ServerConfig config) : config_(std::move(config)), bucket_(config_.bandwidth_cap)
{
    std::error_code ec;
    if (!fs::is_directory(config_.root_dir, ec))
        throw XrdlError(Status::ServerError, "served root is not a directory: " + config_.root_dir.string());
    root_ = fs::canonical(config_.root_dir);

    listen_fd_ = ::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (listen_fd_ < 0)
        throw XrdlError(Status::ServerError, std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(config_.port);
    if (::inet_pton(AF_INET, config_.listen_address.c_str(), &addr.sin_addr) != 1) {
        ::close(listen_fd_);
        throw XrdlError(Status::ServerError, "bad listen address " + config_.listen_address);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 || ::listen(listen_fd_, 128) != 0) {
        auto msg = std::string("bind/listen: ") + std::strerror(errno);
        ::close(listen_fd_);
        throw XrdlError(Status::ServerError, msg);
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    acceptor_ = std::thread([this] { accept_loop(); });
}

Server::~Server()
{
    stop();
}

void Server::stop()
{
    if (stopping_.exchange(true))
        return;
    if (acceptor_.joinable())
        acceptor_.join();
    if (listen_fd_ >= 0) {
        ::close(listen_fd_);
        listen_fd_ = -1;
    }
    std::lock_guard lock(conns_mu_);
    for (auto& c : conns_)
        ::shutdown(c->fd, SHUT_RDWR);
    for (auto& c : conns_)
        if (c->thread.joinable())
            c->thread.join();
    conns_.clear();
}

void Server::reap_finished()
{
    std::lock_guard lock(conns_mu_);
    for (auto it = conns_.begin(); it != conns_.end();) {
        if ((*it)->done.load()) {
            (*it)->thread.join();
            it = conns_.erase(it);
        } else {
            ++it;
        }
    }
}

void Server::accept_loop()
{
    while (!stopping_.load()) {
        pollfd pfd{listen_fd_, POLLIN, 0};
        int rc = ::poll(&pfd, 1, 50);
        if (rc <= 0) {
            reap_finished();
            continue;
        }
        int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0)
            continue;
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        accepted_ += 1;
        auto conn = std::make_unique<Connection>();
        conn->fd = fd;
        auto* raw = conn.get();
        {
            std::lock_guard lock(conns_mu_);
            if (stopping_.load()) {
                ::close(fd);
                conn->fd = -1;
                break;
            }
            conns_.push_back(std::move(conn));
            raw->thread = std::thread([this, raw] {
                serve_connection(*raw);
                raw->done = true;
            });
        }
        reap_finished();
    }
}

void Server::serve_connection(Connection& conn)
{
    const int fd = conn.fd;
    std::uint8_t len_buf[4];
    Bytes body;
    Bytes chunk;
    while (!stopping_.load()) {
        if (!recv_all(fd, len_buf))
            return;
        auto frame_len = detail::load_u32(len_buf);
        if (frame_len == 0 || frame_len > kMaxRequestFrame) {
            send_status(fd, Status::Malformed);
            return;
        }
        body.resize(frame_len);
        if (!recv_all(fd, body))
            return;
        auto req = decode_request(body);
        if (!req) {
            send_status(fd, Status::Malformed);
            return;
        }

        switch (req->opcode) {
        case Opcode::Open: {
            auto path = resolve_inside(root_, req->path);
            int file_fd = path.empty() ? -1 : ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
            struct stat st{};
            if (file_fd >= 0 && ::fstat(file_fd, &st) != 0) {
                ::close(file_fd);
                if (!send_status(fd, Status::ServerError))
                    return;
                break;
            }
            if (file_fd < 0) {
                if (!send_status(fd, Status::NotFound))
                    return;
                break;
            }
            auto handle = conn.next_handle++;
            conn.files[handle] = {file_fd, static_cast<std::uint64_t>(st.st_size)};
            ByteWriter w;
            w.bytes(encode_response_header(Status::Ok, 12));
            w.u32(handle);
            w.u64(static_cast<std::uint64_t>(st.st_size));
            if (!send_all(fd, w.data()))
                return;
            break;
        }
        case Opcode::Read: {
            auto it = conn.files.find(req->handle);
            if (it == conn.files.end()) {
                if (!send_status(fd, Status::BadHandle))
                    return;
                break;
            }
            const auto size = it->second.size;
            if (req->offset > size || req->length > kMaxReadLength) {
                if (!send_status(fd, Status::RangeError))
                    return;
                break;
            }
            const auto n = std::min<std::uint64_t>(req->length, size - req->offset);
            if (!send_all(fd, encode_response_header(Status::Ok, n)))
                return;
            std::uint64_t sent = 0;
            const auto step = std::min<std::uint64_t>(bucket_.chunk_limit(), 1u << 20);
            while (sent < n) {
                auto len = std::min<std::uint64_t>(step, n - sent);
                chunk.resize(len);
                std::size_t got = 0;
                while (got < len) {
                    auto r = ::pread(it->second.fd, chunk.data() + got, len - got,
                                     static_cast<off_t>(req->offset + sent + got));
                    if (r < 0 && errno == EINTR)
                        continue;
                    if (r <= 0)
                        return;  // mid-response failure: drop the connection
                    got += static_cast<std::size_t>(r);
                }
                bucket_.acquire(len);
                if (!send_all(fd, chunk))
                    return;
                sent += len;
                served_ += len;
            }
            break;
        }
        case Opcode::Stat: {
            auto it = conn.files.find(req->handle);
            if (it == conn.files.end()) {
                if (!send_status(fd, Status::BadHandle))
                    return;
                break;
            }
            ByteWriter w;
            w.bytes(encode_response_header(Status::Ok, 8));
            w.u64(it->second.size);
            if (!send_all(fd, w.data()))
                return;
            break;
        }
        case Opcode::Close: {
            auto it = conn.files.find(req->handle);
            if (it == conn.files.end()) {
                if (!send_status(fd, Status::BadHandle))
                    return;
                break;
            }
            ::close(it->second.fd);
            conn.files.erase(it);
            if (!send_status(fd, Status::Ok))
                return;
            break;
        }
        }
    }
}

}  // namespace treeduce::xrdl
