#include "treeduce/treefile.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cstring>
#include <set>

namespace treeduce {

ReadStats& ReadStats::merge(const ReadStats& other)
{
    bytes_read += other.bytes_read;
    baskets_read += other.baskets_read;
    decompress_time_s += other.decompress_time_s;
    return *this;
}

namespace {

using Kind = TreeFileError::Kind;

template <typename U>
U load_be(const std::uint8_t* p)
{
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
        v = static_cast<U>((v << 8) | p[i]);
    return v;
}

template <typename T>
void decode_elements(const std::uint8_t* p, std::size_t count, std::vector<T>& out)
{
    out.resize(count);
    for (std::size_t i = 0; i < count; ++i, p += sizeof(T)) {
        if constexpr (std::is_same_v<T, std::int32_t>)
            out[i] = static_cast<std::int32_t>(load_be<std::uint32_t>(p));
        else if constexpr (std::is_same_v<T, std::int64_t>)
            out[i] = static_cast<std::int64_t>(load_be<std::uint64_t>(p));
        else if constexpr (std::is_same_v<T, float>)
            out[i] = std::bit_cast<float>(load_be<std::uint32_t>(p));
        else if constexpr (std::is_same_v<T, double>)
            out[i] = std::bit_cast<double>(load_be<std::uint64_t>(p));
        else
            out[i] = *p;
    }
}

bool valid_dtype(std::uint8_t v) { return v >= 1 && v <= 5; }

}  // namespace

TreeFileHeader decode_header(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() >= 4 && !std::equal(kTreeFileMagic.begin(), kTreeFileMagic.end(), bytes.begin()))
        throw TreeFileError(Kind::BadMagic, "not a TreeFile (bad magic)");
    if (bytes.size() < kHeaderSize)
        throw TreeFileError(Kind::Truncated, "truncated header: " + std::to_string(bytes.size()) + " bytes");
    ByteReader r(bytes.subspan(4));
    TreeFileHeader h;
    h.version = r.u32();
    h.dir_offset = r.u64();
    h.dir_len = r.u64();
    h.file_len = r.u64();
    if (h.version != kTreeFileVersion)
        throw TreeFileError(Kind::BadVersion, "unsupported TreeFile version " + std::to_string(h.version));
    return h;
}

std::vector<TreeMeta> decode_directory(std::span<const std::uint8_t> payload)
{
    std::vector<TreeMeta> trees;
    try {
        ByteReader r(payload);
        auto tree_count = r.u32();
        std::set<std::string> tree_names;
        for (std::uint32_t t = 0; t < tree_count; ++t) {
            TreeMeta tree;
            tree.name = r.str16();
            tree.n_entries = r.u64();
            if (tree.name.empty() || !tree_names.insert(tree.name).second)
                throw TreeFileError(Kind::CorruptDirectory, "empty or duplicate tree name");
            auto branch_count = r.u32();
            std::set<std::string> branch_names;
            for (std::uint32_t b = 0; b < branch_count; ++b) {
                BranchMeta branch;
                branch.name = r.str16();
                if (branch.name.empty() || !branch_names.insert(branch.name).second)
                    throw TreeFileError(Kind::CorruptDirectory,
                                        "empty or duplicate branch name in tree '" + tree.name + "'");
                auto dtype = r.u8();
                auto shape = r.u8();
                if (!valid_dtype(dtype) || shape > 1)
                    throw TreeFileError(Kind::CorruptDirectory, "bad dtype/shape for branch '" + branch.name + "'");
                branch.dtype = static_cast<DType>(dtype);
                branch.shape = static_cast<Shape>(shape);
                auto basket_count = r.u32();
                std::uint64_t next = 0;
                for (std::uint32_t k = 0; k < basket_count; ++k) {
                    BasketIndexEntry e;
                    e.first_entry = r.u64();
                    e.n_entries = r.u32();
                    e.offset = r.u64();
                    e.stored_len = r.u32();
                    e.raw_len = r.u32();
                    auto codec = r.u8();
                    if (codec > 1)
                        throw TreeFileError(Kind::CorruptDirectory, "unknown basket codec");
                    e.codec = static_cast<Codec>(codec);
                    if (e.n_entries == 0 || e.first_entry != next)
                        throw TreeFileError(Kind::CorruptDirectory,
                                            "baskets of branch '" + branch.name + "' are not contiguous");
                    next += e.n_entries;
                    branch.baskets.push_back(e);
                }
                if (next != tree.n_entries)
                    throw TreeFileError(Kind::CorruptDirectory,
                                        "baskets of branch '" + branch.name + "' cover " + std::to_string(next) +
                                            " of " + std::to_string(tree.n_entries) + " entries");
                tree.branches.push_back(std::move(branch));
            }
            trees.push_back(std::move(tree));
        }
        if (!r.at_end())
            throw TreeFileError(Kind::CorruptDirectory, "trailing bytes after directory");
    } catch (const ByteReader::Underflow& u) {
        throw TreeFileError(Kind::CorruptDirectory, "directory ends early at byte " + std::to_string(u.position));
    }
    return trees;
}

ColumnChunk decode_basket(std::span<const std::uint8_t> raw, DType dtype, Shape shape, std::uint64_t first_entry,
                          std::uint32_t n_entries)
{
    ColumnChunk c;
    c.dtype = dtype;
    c.shape = shape;
    c.range = {first_entry, first_entry + n_entries};
    c.values = make_values(dtype);
    const auto esize = element_size(dtype);
    std::size_t count = n_entries;
    const std::uint8_t* p = raw.data();
    if (shape == Shape::Jagged) {
        const std::size_t header = (static_cast<std::size_t>(n_entries) + 1) * 4;
        if (raw.size() < header)
            throw TreeFileError(Kind::CorruptBasket, "jagged basket shorter than its offsets array");
        c.offsets.resize(n_entries + 1);
        for (std::size_t i = 0; i <= n_entries; ++i)
            c.offsets[i] = load_be<std::uint32_t>(p + 4 * i);
        if (c.offsets[0] != 0 || !std::is_sorted(c.offsets.begin(), c.offsets.end()))
            throw TreeFileError(Kind::CorruptBasket, "jagged basket offsets are not cumulative");
        count = c.offsets.back();
        p += header;
        if (raw.size() - header != count * esize)
            throw TreeFileError(Kind::CorruptBasket, "jagged basket payload size disagrees with its offsets");
    } else if (raw.size() != count * esize) {
        throw TreeFileError(Kind::CorruptBasket, "flat basket payload size disagrees with its entry count");
    }
    std::visit([&](auto& vec) { decode_elements(p, count, vec); }, c.values);
    if (dtype == DType::Bool) {
        const auto& b = std::get<std::vector<std::uint8_t>>(c.values);
        if (std::any_of(b.begin(), b.end(), [](std::uint8_t x) { return x > 1; }))
            throw TreeFileError(Kind::CorruptBasket, "bool basket holds a value other than 0/1");
    }
    return c;
}

TreeFileReader TreeFileReader::open(std::shared_ptr<ByteSource> source)
{
    TreeFileReader reader;
    reader.source_ = std::move(source);
    auto& src = *reader.source_;
    const auto size = src.size();

    auto head = src.read(0, static_cast<std::size_t>(std::min<std::uint64_t>(size, kHeaderSize)));
    reader.header_ = decode_header(head);
    const auto& h = reader.header_;
    if (size < h.file_len)
        throw TreeFileError(Kind::Truncated, "file has " + std::to_string(size) + " bytes, header declares " +
                                                 std::to_string(h.file_len));
    if (size > h.file_len)
        throw TreeFileError(Kind::CorruptDirectory, "file is longer than its header declares");
    if (h.dir_offset < kHeaderSize || h.dir_len < kRecordPrefixSize || h.dir_offset > h.file_len ||
        h.dir_len > h.file_len - h.dir_offset)
        throw TreeFileError(Kind::CorruptDirectory, "directory location outside the file");

    auto record = src.read(h.dir_offset, static_cast<std::size_t>(h.dir_len));
    ByteReader r(record);
    auto codec = r.u8();
    auto raw_len = r.u32();
    if (codec > 1)
        throw TreeFileError(Kind::Decompression, "unknown directory codec");
    auto payload = decompress_record(r.bytes(r.remaining()), static_cast<Codec>(codec), raw_len);
    reader.trees_ = decode_directory(payload);

    for (const auto& tree : reader.trees_)
        for (const auto& branch : tree.branches)
            for (const auto& b : branch.baskets)
                if (b.offset < kHeaderSize || b.offset > h.dir_offset || b.record_size() > h.dir_offset - b.offset)
                    throw TreeFileError(Kind::CorruptDirectory,
                                        "basket of branch '" + branch.name + "' lies outside the basket region");
    return reader;
}

const TreeMeta& TreeFileReader::tree(std::string_view name) const
{
    for (const auto& t : trees_)
        if (t.name == name)
            return t;
    throw TreeFileError(Kind::UnknownTree, "unknown tree '" + std::string(name) + "'");
}

ColumnChunk TreeFileReader::read_branch(std::string_view tree_name, std::string_view branch_name, EntryRange range,
                                        ReadStats* stats) const
{
    const auto& t = tree(tree_name);
    const auto* branch = t.find_branch(branch_name);
    if (!branch)
        throw TreeFileError(Kind::UnknownBranch,
                            "unknown branch '" + std::string(branch_name) + "' in tree '" + t.name + "'");
    if (range.last < range.first || range.last > t.n_entries)
        throw TreeFileError(Kind::RangeOutOfBounds, "entry range [" + std::to_string(range.first) + ", " +
                                                        std::to_string(range.last) + ") outside [0, " +
                                                        std::to_string(t.n_entries) + ")");

    ColumnChunk out;
    out.dtype = branch->dtype;
    out.shape = branch->shape;
    out.range = {range.first, range.first};
    out.values = make_values(branch->dtype);
    if (branch->shape == Shape::Jagged)
        out.offsets.push_back(0);
    if (range.empty())
        return out;

    const auto& baskets = branch->baskets;
    auto it = std::upper_bound(baskets.begin(), baskets.end(), range.first,
                               [](std::uint64_t e, const BasketIndexEntry& b) { return e < b.first_entry; });
    --it;
    ReadStats local;
    for (; it != baskets.end() && it->first_entry < range.last; ++it) {
        const auto& b = *it;
        auto record = source_->read(b.offset, static_cast<std::size_t>(b.record_size()));
        local.bytes_read += record.size();
        local.baskets_read += 1;

        ByteReader r(record);
        auto codec = r.u8();
        auto raw_len = r.u32();
        if (codec != static_cast<std::uint8_t>(b.codec))
            throw TreeFileError(Kind::CodecMismatch, "basket codec differs from the directory entry");
        if (raw_len != b.raw_len)
            throw TreeFileError(Kind::CorruptBasket, "basket raw_len differs from the directory entry");

        auto start = std::chrono::steady_clock::now();
        auto raw = decompress_record(r.bytes(b.stored_len), b.codec, b.raw_len);
        local.decompress_time_s += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        auto chunk = decode_basket(raw, branch->dtype, branch->shape, b.first_entry, b.n_entries);
        auto lo = std::max(range.first, b.first_entry) - b.first_entry;
        auto hi = std::min(range.last, b.first_entry + b.n_entries) - b.first_entry;
        if (lo == 0 && hi == b.n_entries)
            out.append(chunk);
        else
            out.append(chunk.slice({lo, hi}));
    }
    if (stats)
        stats->merge(local);
    return out;
}

}  // namespace treeduce
