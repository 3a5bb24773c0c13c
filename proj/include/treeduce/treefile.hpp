#pragma once

// TreeFile v1: a basket-organized columnar container.
//
//   header    "TRF1" | version u32 | dir_offset u64 | dir_len u64 | file_len u64
//   baskets   one record per basket, branch by branch, in entry order
//   directory one record holding every TreeMeta, at end of file
//
// A record is codec u8 | raw_len u32 | payload. Integers are big-endian.

#include "treeduce/column.hpp"
#include "treeduce/io.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace treeduce {

inline constexpr std::array<std::uint8_t, 4> kTreeFileMagic{'T', 'R', 'F', '1'};
inline constexpr std::uint32_t kTreeFileVersion = 1;
inline constexpr std::size_t kHeaderSize = 32;
inline constexpr std::size_t kRecordPrefixSize = 5;

enum class Codec : std::uint8_t { None = 0, Deflate = 1 };

class TreeFileError : public std::runtime_error
{
public:
    enum class Kind {
        BadMagic,
        BadVersion,
        Truncated,
        CorruptDirectory,
        Decompression,
        LengthMismatch,
        CodecMismatch,
        CorruptBasket,
        UnknownTree,
        UnknownBranch,
        RangeOutOfBounds,
        InvalidInput,
    };

    TreeFileError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    [[nodiscard]] Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct TreeFileHeader
{
    std::uint32_t version = kTreeFileVersion;
    std::uint64_t dir_offset = 0;
    std::uint64_t dir_len = 0;
    std::uint64_t file_len = 0;

    friend bool operator==(const TreeFileHeader&, const TreeFileHeader&) = default;
};

/// Location of one basket record. `stored_len` counts payload bytes only; the
/// record occupies [offset, offset + 5 + stored_len).
struct BasketIndexEntry
{
    std::uint64_t first_entry = 0;
    std::uint32_t n_entries = 0;
    std::uint64_t offset = 0;
    std::uint32_t stored_len = 0;
    std::uint32_t raw_len = 0;
    Codec codec = Codec::None;

    [[nodiscard]] std::uint64_t record_size() const { return kRecordPrefixSize + stored_len; }
    friend bool operator==(const BasketIndexEntry&, const BasketIndexEntry&) = default;
};

struct BranchMeta
{
    std::string name;
    DType dtype = DType::F64;
    Shape shape = Shape::Flat;
    std::vector<BasketIndexEntry> baskets;

    friend bool operator==(const BranchMeta&, const BranchMeta&) = default;
};

struct TreeMeta
{
    std::string name;
    std::uint64_t n_entries = 0;
    std::vector<BranchMeta> branches;

    [[nodiscard]] const BranchMeta* find_branch(std::string_view branch) const;
    friend bool operator==(const TreeMeta&, const TreeMeta&) = default;
};

// ---------------------------------------------------------------------------
// Records

/// Compresses with zlib when codec is Deflate. Returns the payload only.
Bytes compress_payload(std::span<const std::uint8_t> raw, Codec codec, int deflate_level = 1);

/// Inverse of compress_payload. Output length is exactly raw_len or the call
/// throws (Decompression or LengthMismatch).
Bytes decompress_record(std::span<const std::uint8_t> payload, Codec codec, std::uint32_t raw_len);

// ---------------------------------------------------------------------------
// Writing

struct BranchData
{
    std::string name;
    ColumnChunk column;  ///< dtype/shape are taken from the chunk
};

struct TreeData
{
    std::string name;
    std::vector<BranchData> branches;

    /// Entries shared by every branch; 0 for a tree without branches.
    [[nodiscard]] std::uint64_t n_entries() const;
};

struct WriteOptions
{
    std::uint32_t basket_target_entries = 4096;
    Codec codec = Codec::Deflate;
    int deflate_level = 1;
};

/// Streams trees into a sink: header placeholder, baskets, directory, then the
/// header is patched. Output bytes are a pure function of the inputs.
class TreeFileWriter
{
public:
    TreeFileWriter(ByteSink& sink, WriteOptions options);

    /// Writes every basket of `tree` and records its metadata.
    void add_tree(const TreeData& tree);

    /// Writes the directory and patches the header. The writer is unusable
    /// afterwards.
    TreeFileHeader finish();

    [[nodiscard]] const std::vector<TreeMeta>& trees() const { return trees_; }

private:
    BasketIndexEntry write_basket(const ColumnChunk& column, EntryRange range);

    ByteSink& sink_;
    WriteOptions options_;
    std::vector<TreeMeta> trees_;
    bool finished_ = false;
};

TreeFileHeader write_tree(ByteSink& sink, const TreeData& tree, const WriteOptions& options = {});

/// Encoded basket payload (before compression) for entries `range` of a
/// chunk covering them.
Bytes encode_basket(const ColumnChunk& column, EntryRange range);

Bytes encode_directory(const std::vector<TreeMeta>& trees);
std::vector<TreeMeta> decode_directory(std::span<const std::uint8_t> payload);

Bytes encode_header(const TreeFileHeader& header);
TreeFileHeader decode_header(std::span<const std::uint8_t> bytes);

// ---------------------------------------------------------------------------
// Reading

struct ReadStats
{
    std::uint64_t bytes_read = 0;
    std::uint64_t baskets_read = 0;
    double decompress_time_s = 0.0;

    ReadStats& merge(const ReadStats& other);
};

/// Open TreeFile. Immutable after open(); read_branch may be called from
/// several threads when the byte source supports concurrent positioned reads.
class TreeFileReader
{
public:
    /// Reads and validates the header and directory only.
    static TreeFileReader open(std::shared_ptr<ByteSource> source);

    [[nodiscard]] const TreeFileHeader& header() const { return header_; }
    [[nodiscard]] const std::vector<TreeMeta>& trees() const { return trees_; }
    [[nodiscard]] const TreeMeta& tree(std::string_view name) const;

    [[nodiscard]] ColumnChunk read_branch(std::string_view tree_name, std::string_view branch_name,
                                          EntryRange range, ReadStats* stats = nullptr) const;

    [[nodiscard]] ByteSource& source() const { return *source_; }

private:
    TreeFileReader() = default;

    std::shared_ptr<ByteSource> source_;
    TreeFileHeader header_;
    std::vector<TreeMeta> trees_;
};

/// Decodes a basket payload into a chunk starting at `first_entry`.
ColumnChunk decode_basket(std::span<const std::uint8_t> raw, DType dtype, Shape shape, std::uint64_t first_entry,
                          std::uint32_t n_entries);

}  // namespace treeduce
