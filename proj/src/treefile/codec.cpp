#include "treeduce/treefile.hpp"

#include <limits>
#include <zlib.h>

namespace treeduce {

namespace {

Bytes deflate_bytes(std::span<const std::uint8_t> raw, int level)
{
    z_stream zs{};
    if (deflateInit(&zs, level) != Z_OK)
        throw TreeFileError(TreeFileError::Kind::InvalidInput, "deflateInit failed");
    Bytes out(deflateBound(&zs, static_cast<uLong>(raw.size())));
    zs.next_in = const_cast<Bytef*>(raw.data());
    zs.avail_in = static_cast<uInt>(raw.size());
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = deflate(&zs, Z_FINISH);
    deflateEnd(&zs);
    if (rc != Z_STREAM_END)
        throw TreeFileError(TreeFileError::Kind::InvalidInput, "deflate did not finish");
    out.resize(zs.total_out);
    return out;
}

}  // namespace

Bytes compress_payload(std::span<const std::uint8_t> raw, Codec codec, int deflate_level)
{
    if (raw.size() > std::numeric_limits<std::uint32_t>::max())
        throw TreeFileError(TreeFileError::Kind::InvalidInput, "record larger than 4 GiB");
    switch (codec) {
    case Codec::None: return Bytes(raw.begin(), raw.end());
    case Codec::Deflate: return deflate_bytes(raw, deflate_level);
    }
    throw TreeFileError(TreeFileError::Kind::InvalidInput, "unknown codec");
}

Bytes decompress_record(std::span<const std::uint8_t> payload, Codec codec, std::uint32_t raw_len)
{
    if (codec == Codec::None) {
        if (payload.size() != raw_len)
            throw TreeFileError(TreeFileError::Kind::LengthMismatch,
                                "stored record has " + std::to_string(payload.size()) + " bytes, expected " +
                                    std::to_string(raw_len));
        return Bytes(payload.begin(), payload.end());
    }
    if (codec != Codec::Deflate)
        throw TreeFileError(TreeFileError::Kind::Decompression,
                            "unknown codec " + std::to_string(static_cast<int>(codec)));

    Bytes out(raw_len);
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK)
        throw TreeFileError(TreeFileError::Kind::Decompression, "inflateInit failed");
    zs.next_in = const_cast<Bytef*>(payload.data());
    zs.avail_in = static_cast<uInt>(payload.size());
    // zlib rejects a null output pointer even when avail_out is 0.
    std::uint8_t empty_sink = 0;
    zs.next_out = out.empty() ? &empty_sink : out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    int rc = inflate(&zs, Z_FINISH);
    std::uint64_t produced = zs.total_out;
    bool longer = false;
    if (rc == Z_BUF_ERROR && zs.avail_out == 0) {
        // Output buffer full: probe for a single extra byte to tell an
        // over-long stream from a truncated one.
        std::uint8_t extra = 0;
        zs.next_out = &extra;
        zs.avail_out = 1;
        rc = inflate(&zs, Z_FINISH);
        longer = zs.avail_out == 0;
    }
    inflateEnd(&zs);
    if (longer)
        throw TreeFileError(TreeFileError::Kind::LengthMismatch,
                            "record inflates past declared raw_len " + std::to_string(raw_len));
    if (rc != Z_STREAM_END)
        throw TreeFileError(TreeFileError::Kind::Decompression,
                            std::string("inflate failed: ") + (zs.msg ? zs.msg : "incomplete stream"));
    if (produced != raw_len)
        throw TreeFileError(TreeFileError::Kind::LengthMismatch,
                            "record inflates to " + std::to_string(produced) + " bytes, declared " +
                                std::to_string(raw_len));
    return out;
}

}  // namespace treeduce
