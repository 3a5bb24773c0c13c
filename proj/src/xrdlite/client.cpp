#include "socket_util.hpp"

#include "treeduce/xrdlite.hpp"

#include <cstring>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>

namespace treeduce::xrdl {

using detail::recv_all;
using detail::send_all;

Client::Client(const std::string& host, std::uint16_t port)
{
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    auto service = std::to_string(port);
    if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0)
        throw XrdlError(Status::ServerError, "resolve " + host + ": " + ::gai_strerror(rc));
    std::string last_error = "no addresses";
    for (auto* ai = res; ai; ai = ai->ai_next) {
        int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
        if (fd < 0)
            continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) {
            fd_ = fd;
            break;
        }
        last_error = std::strerror(errno);
        ::close(fd);
    }
    ::freeaddrinfo(res);
    if (fd_ < 0)
        throw XrdlError(Status::ServerError, "connect " + host + ":" + service + ": " + last_error);
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

Client::~Client()
{
    if (fd_ >= 0)
        ::close(fd_);
}

Status Client::read_response(Bytes& payload, std::size_t max_payload, std::span<std::uint8_t> direct,
                             std::size_t* direct_len)
{
    std::uint8_t head[5];
    if (!recv_all(fd_, head))
        throw XrdlError(Status::ServerError, "connection closed by server");
    auto frame_len = detail::load_u32(head);
    if (frame_len == 0)
        throw XrdlError(Status::ServerError, "empty response frame");
    auto status = static_cast<Status>(head[4]);
    std::size_t n = frame_len - 1;
    if (n > max_payload)
        throw XrdlError(Status::ServerError, "response payload too long: " + std::to_string(n));
    if (status == Status::Ok && direct_len) {
        if (!recv_all(fd_, direct.first(n)))
            throw XrdlError(Status::ServerError, "connection closed mid-response");
        *direct_len = n;
        return status;
    }
    payload.resize(n);
    if (!recv_all(fd_, payload))
        throw XrdlError(Status::ServerError, "connection closed mid-response");
    return status;
}

Status Client::roundtrip(const Request& r, Bytes& payload, std::size_t max_payload)
{
    if (!send_all(fd_, encode_request(r)))
        throw XrdlError(Status::ServerError, "send failed");
    return read_response(payload, max_payload);
}

namespace {

void expect_ok(Status s, const std::string& what)
{
    if (s != Status::Ok)
        throw XrdlError(s, what + ": " + std::string(to_string(s)));
}

}  // namespace

RemoteFile Client::open(const std::string& path)
{
    if (path.size() > 0xffff)
        throw XrdlError(Status::Malformed, "path too long");
    Request r;
    r.opcode = Opcode::Open;
    r.path = path;
    Bytes payload;
    expect_ok(roundtrip(r, payload, 12), "OPEN " + path);
    if (payload.size() != 12)
        throw XrdlError(Status::ServerError, "bad OPEN response length");
    ByteReader rd(payload);
    RemoteFile f;
    f.handle = rd.u32();
    f.size = rd.u64();
    return f;
}

std::size_t Client::read(std::uint32_t handle, std::uint64_t offset, std::span<std::uint8_t> out)
{
    if (out.size() > kMaxReadLength)
        throw XrdlError(Status::RangeError, "READ length exceeds limit");
    Request r;
    r.opcode = Opcode::Read;
    r.handle = handle;
    r.offset = offset;
    r.length = static_cast<std::uint32_t>(out.size());
    if (!send_all(fd_, encode_request(r)))
        throw XrdlError(Status::ServerError, "send failed");
    Bytes payload;
    std::size_t got = 0;
    expect_ok(read_response(payload, out.size(), out, &got), "READ");
    return got;
}

std::uint64_t Client::stat(std::uint32_t handle)
{
    Request r;
    r.opcode = Opcode::Stat;
    r.handle = handle;
    Bytes payload;
    expect_ok(roundtrip(r, payload, 8), "STAT");
    if (payload.size() != 8)
        throw XrdlError(Status::ServerError, "bad STAT response length");
    return ByteReader(payload).u64();
}

void Client::close(std::uint32_t handle)
{
    Request r;
    r.opcode = Opcode::Close;
    r.handle = handle;
    Bytes payload;
    expect_ok(roundtrip(r, payload, 0), "CLOSE");
}

std::optional<Status> Client::send_raw(std::span<const std::uint8_t> bytes)
{
    if (!send_all(fd_, bytes))
        return std::nullopt;
    try {
        Bytes payload;
        return read_response(payload, kMaxReadLength);
    } catch (const XrdlError&) {
        return std::nullopt;
    }
}

}  // namespace treeduce::xrdl
