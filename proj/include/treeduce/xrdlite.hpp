#pragma once

// xrdlite: a byte-range remote file protocol.
//
// Every frame is frame_len u32 followed by frame_len bytes; integers are
// big-endian.
//
//   request   frame_len | opcode u8 | payload
//     OPEN  (1)  path: u16 length + UTF-8 bytes, relative to the served root
//     READ  (2)  handle u32 | offset u64 | length u32
//     STAT  (3)  handle u32
//     CLOSE (4)  handle u32
//
//   response  frame_len | status u8 | payload
//     OPEN   OK -> handle u32 | file_len u64
//     READ   OK -> min(length, file_len - offset) bytes; RangeError iff offset > file_len
//     STAT   OK -> file_len u64
//     CLOSE  OK -> empty
//   Error responses carry no payload. A Malformed response is followed by
//   the server closing the connection.

#include "treeduce/bytes.hpp"
#include "treeduce/io.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <list>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace treeduce::xrdl {

inline constexpr std::uint16_t kDefaultPort = 1094;
inline constexpr std::uint32_t kMaxRequestFrame = 4096;
inline constexpr std::uint32_t kMaxReadLength = 256u << 20;

enum class Opcode : std::uint8_t { Open = 1, Read = 2, Stat = 3, Close = 4 };

enum class Status : std::uint8_t {
    Ok = 0,
    NotFound = 1,
    BadHandle = 2,
    RangeError = 3,
    Malformed = 4,
    ServerError = 5,
};

std::string_view to_string(Status s);

struct Request
{
    Opcode opcode = Opcode::Open;
    std::string path;          // OPEN
    std::uint32_t handle = 0;  // READ, STAT, CLOSE
    std::uint64_t offset = 0;  // READ
    std::uint32_t length = 0;  // READ
};

/// Complete request frame including the frame_len prefix.
Bytes encode_request(const Request& r);

/// Decodes a request body (the bytes after frame_len). Returns nullopt when
/// the body is malformed.
std::optional<Request> decode_request(std::span<const std::uint8_t> body);

/// Response frame header (frame_len and status) for a payload of `payload_len`.
Bytes encode_response_header(Status status, std::size_t payload_len);

class XrdlError : public std::runtime_error
{
public:
    XrdlError(Status status, const std::string& what) : std::runtime_error(what), status_(status) {}
    /// Status::ServerError also covers transport failures (connect, reset).
    [[nodiscard]] Status status() const { return status_; }

private:
    Status status_;
};

/// `xrdl://host:port/path`; port defaults to 1094.
struct Url
{
    std::string host;
    std::uint16_t port = kDefaultPort;
    std::string path;
};

bool is_url(std::string_view text);
Url parse_url(std::string_view text);

// ---------------------------------------------------------------------------
// Server

/// Global token bucket refilled every 10 ms with cap * 10 ms tokens, holding
/// at most two ticks' worth.
class TokenBucket
{
public:
    using Clock = std::chrono::steady_clock;
    static constexpr auto kTick = std::chrono::milliseconds(10);

    /// bytes_per_second == 0 means unlimited.
    explicit TokenBucket(std::uint64_t bytes_per_second);

    /// Blocks until `n` bytes may be sent. n must not exceed chunk_limit().
    void acquire(std::uint64_t n);

    /// Largest grant a single acquire() may ask for.
    [[nodiscard]] std::uint64_t chunk_limit() const;
    [[nodiscard]] bool unlimited() const { return rate_ == 0; }
    [[nodiscard]] std::uint64_t rate() const { return rate_; }

private:
    void refill(Clock::time_point now);

    std::uint64_t rate_;
    double per_tick_;
    double burst_;
    std::mutex mu_;
    double tokens_;
    Clock::time_point last_tick_;
};

struct ServerConfig
{
    std::filesystem::path root_dir;
    std::uint64_t bandwidth_cap = 0;  ///< bytes/second; 0 = unlimited
    std::string listen_address = "127.0.0.1";
    std::uint16_t port = kDefaultPort;  ///< 0 picks an ephemeral port
};

/// Multi-connection server; one thread per connection. Stops on destruction.
class Server
{
public:
    explicit Server(ServerConfig config);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    [[nodiscard]] std::uint16_t port() const { return port_; }
    [[nodiscard]] const ServerConfig& config() const { return config_; }

    /// Payload bytes sent in OK READ responses since start.
    [[nodiscard]] std::uint64_t bytes_served() const { return served_.load(); }
    [[nodiscard]] std::uint64_t connections_accepted() const { return accepted_.load(); }

    void stop();

private:
    struct Connection;

    void accept_loop();
    void serve_connection(Connection& conn);
    void reap_finished();

    ServerConfig config_;
    std::filesystem::path root_;
    TokenBucket bucket_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<bool> stopping_{false};
    std::atomic<std::uint64_t> served_{0};
    std::atomic<std::uint64_t> accepted_{0};
    std::thread acceptor_;
    std::mutex conns_mu_;
    std::list<std::unique_ptr<Connection>> conns_;
};

// ---------------------------------------------------------------------------
// Client

struct RemoteFile
{
    std::uint32_t handle = 0;
    std::uint64_t size = 0;
};

/// One synchronous connection: a single request in flight at a time.
class Client
{
public:
    Client(const std::string& host, std::uint16_t port);
    ~Client();
    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    RemoteFile open(const std::string& path);
    /// Reads into `out`, returning the number of bytes the server sent.
    std::size_t read(std::uint32_t handle, std::uint64_t offset, std::span<std::uint8_t> out);
    std::uint64_t stat(std::uint32_t handle);
    void close(std::uint32_t handle);

    /// Sends raw bytes and returns the status of the next response, or
    /// nullopt if the server closed the connection. For protocol tests.
    std::optional<Status> send_raw(std::span<const std::uint8_t> bytes);

private:
    Status roundtrip(const Request& r, Bytes& payload, std::size_t max_payload);
    Status read_response(Bytes& payload, std::size_t max_payload, std::span<std::uint8_t> direct = {},
                         std::size_t* direct_len = nullptr);

    int fd_ = -1;
};

// ---------------------------------------------------------------------------
// readAhead connector

struct ConnectorConfig
{
    std::uint64_t read_ahead = 65536;
    std::size_t max_cache_windows = 4;
};

/// Remote byte source that fetches max(length, read_ahead) bytes per miss and
/// keeps the most recent windows in an LRU cache. Single-owner: not safe for
/// concurrent use.
class ReadAheadSource final : public ByteSource
{
public:
    ReadAheadSource(std::unique_ptr<Client> client, RemoteFile file, ConnectorConfig config);
    ~ReadAheadSource() override;

    [[nodiscard]] std::uint64_t size() const override { return file_.size; }
    void read_at(std::uint64_t offset, std::span<std::uint8_t> out) override;
    [[nodiscard]] IoStats stats() const override { return stats_; }
    [[nodiscard]] const ConnectorConfig& config() const { return config_; }

private:
    struct Window
    {
        std::uint64_t offset;
        Bytes data;
    };

    std::unique_ptr<Client> client_;
    RemoteFile file_;
    ConnectorConfig config_;
    std::list<Window> windows_;  // most recently used first
    IoStats stats_;
};

std::unique_ptr<ReadAheadSource> connector_open(const std::string& host, std::uint16_t port, const std::string& path,
                                                ConnectorConfig config = {});
std::unique_ptr<ReadAheadSource> connector_open(const Url& url, ConnectorConfig config = {});

}  // namespace treeduce::xrdl
