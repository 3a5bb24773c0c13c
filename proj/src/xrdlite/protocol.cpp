#include "treeduce/xrdlite.hpp"

#include <charconv>

namespace treeduce::xrdl {

std::string_view to_string(Status s)
{
    switch (s) {
    case Status::Ok: return "OK";
    case Status::NotFound: return "NotFound";
    case Status::BadHandle: return "BadHandle";
    case Status::RangeError: return "RangeError";
    case Status::Malformed: return "Malformed";
    case Status::ServerError: return "ServerError";
    }
    return "Unknown";
}

Bytes encode_request(const Request& r)
{
    ByteWriter body;
    body.u8(static_cast<std::uint8_t>(r.opcode));
    switch (r.opcode) {
    case Opcode::Open: body.str16(r.path); break;
    case Opcode::Read:
        body.u32(r.handle);
        body.u64(r.offset);
        body.u32(r.length);
        break;
    case Opcode::Stat:
    case Opcode::Close: body.u32(r.handle); break;
    }
    ByteWriter frame;
    frame.u32(static_cast<std::uint32_t>(body.size()));
    frame.bytes(body.data());
    return frame.take();
}

std::optional<Request> decode_request(std::span<const std::uint8_t> body)
{
    try {
        ByteReader r(body);
        Request req;
        auto op = r.u8();
        switch (op) {
        case 1:
            req.opcode = Opcode::Open;
            req.path = r.str16();
            break;
        case 2:
            req.opcode = Opcode::Read;
            req.handle = r.u32();
            req.offset = r.u64();
            req.length = r.u32();
            break;
        case 3:
        case 4:
            req.opcode = static_cast<Opcode>(op);
            req.handle = r.u32();
            break;
        default: return std::nullopt;
        }
        if (!r.at_end())
            return std::nullopt;
        return req;
    } catch (const ByteReader::Underflow&) {
        return std::nullopt;
    }
}

Bytes encode_response_header(Status status, std::size_t payload_len)
{
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(1 + payload_len));
    w.u8(static_cast<std::uint8_t>(status));
    return w.take();
}

bool is_url(std::string_view text)
{
    return text.starts_with("xrdl://");
}

Url parse_url(std::string_view text)
{
    if (!is_url(text))
        throw std::invalid_argument("not an xrdl:// URL: " + std::string(text));
    auto rest = text.substr(7);
    auto slash = rest.find('/');
    if (slash == std::string_view::npos || slash + 1 >= rest.size())
        throw std::invalid_argument("URL has no path: " + std::string(text));
    auto authority = rest.substr(0, slash);
    Url url;
    url.path = std::string(rest.substr(slash + 1));
    auto colon = authority.rfind(':');
    if (colon == std::string_view::npos) {
        url.host = std::string(authority);
    } else {
        url.host = std::string(authority.substr(0, colon));
        auto port_text = authority.substr(colon + 1);
        unsigned port = 0;
        auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
        if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port == 0 || port > 65535)
            throw std::invalid_argument("bad port in URL: " + std::string(text));
        url.port = static_cast<std::uint16_t>(port);
    }
    if (url.host.empty())
        throw std::invalid_argument("URL has no host: " + std::string(text));
    return url;
}

}  // namespace treeduce::xrdl
