#include "treeduce/treefile.hpp"

#include <algorithm>
#include <limits>
#include <set>

namespace treeduce {

std::uint64_t TreeData::n_entries() const
{
    return branches.empty() ? 0 : branches.front().column.entries();
}

const BranchMeta* TreeMeta::find_branch(std::string_view branch) const
{
    auto it = std::find_if(branches.begin(), branches.end(), [&](const BranchMeta& b) { return b.name == branch; });
    return it == branches.end() ? nullptr : &*it;
}

Bytes encode_header(const TreeFileHeader& header)
{
    ByteWriter w;
    w.bytes(kTreeFileMagic);
    w.u32(header.version);
    w.u64(header.dir_offset);
    w.u64(header.dir_len);
    w.u64(header.file_len);
    return w.take();
}

Bytes encode_basket(const ColumnChunk& column, EntryRange range)
{
    auto local_first = range.first - column.range.first;
    auto local_last = range.last - column.range.first;
    std::size_t lo = local_first;
    std::size_t hi = local_last;
    ByteWriter w;
    if (column.shape == Shape::Jagged) {
        lo = column.offsets[local_first];
        hi = column.offsets[local_last];
        if (hi - lo > std::numeric_limits<std::uint32_t>::max())
            throw TreeFileError(TreeFileError::Kind::InvalidInput, "basket holds more than 2^32 elements");
        w.reserve((range.size() + 1) * 4 + (hi - lo) * element_size(column.dtype));
        for (auto i = local_first; i <= local_last; ++i)
            w.u32(static_cast<std::uint32_t>(column.offsets[i] - lo));
    } else {
        w.reserve((hi - lo) * element_size(column.dtype));
    }
    std::visit(
        [&](const auto& vec) {
            using T = typename std::decay_t<decltype(vec)>::value_type;
            for (auto i = lo; i < hi; ++i) {
                if constexpr (std::is_same_v<T, std::int32_t>)
                    w.i32(vec[i]);
                else if constexpr (std::is_same_v<T, std::int64_t>)
                    w.i64(vec[i]);
                else if constexpr (std::is_same_v<T, float>)
                    w.f32(vec[i]);
                else if constexpr (std::is_same_v<T, double>)
                    w.f64(vec[i]);
                else
                    w.u8(vec[i]);
            }
        },
        column.values);
    return w.take();
}

Bytes encode_directory(const std::vector<TreeMeta>& trees)
{
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(trees.size()));
    for (const auto& tree : trees) {
        w.str16(tree.name);
        w.u64(tree.n_entries);
        w.u32(static_cast<std::uint32_t>(tree.branches.size()));
        for (const auto& branch : tree.branches) {
            w.str16(branch.name);
            w.u8(static_cast<std::uint8_t>(branch.dtype));
            w.u8(static_cast<std::uint8_t>(branch.shape));
            w.u32(static_cast<std::uint32_t>(branch.baskets.size()));
            for (const auto& b : branch.baskets) {
                w.u64(b.first_entry);
                w.u32(b.n_entries);
                w.u64(b.offset);
                w.u32(b.stored_len);
                w.u32(b.raw_len);
                w.u8(static_cast<std::uint8_t>(b.codec));
            }
        }
    }
    return w.take();
}

TreeFileWriter::TreeFileWriter(ByteSink& sink, WriteOptions options) : sink_(sink), options_(options)
{
    if (options_.basket_target_entries == 0)
        throw TreeFileError(TreeFileError::Kind::InvalidInput, "basket_target_entries must be at least 1");
    if (options_.codec != Codec::None && options_.codec != Codec::Deflate)
        throw TreeFileError(TreeFileError::Kind::InvalidInput, "unsupported codec");
    if (sink_.position() != 0)
        throw TreeFileError(TreeFileError::Kind::InvalidInput, "sink must be empty");
    sink_.write(encode_header(TreeFileHeader{}));
}

namespace {

void write_record(ByteSink& sink, Codec codec, std::uint32_t raw_len, std::span<const std::uint8_t> payload)
{
    ByteWriter prefix;
    prefix.u8(static_cast<std::uint8_t>(codec));
    prefix.u32(raw_len);
    sink.write(prefix.data());
    sink.write(payload);
}

}  // namespace

BasketIndexEntry TreeFileWriter::write_basket(const ColumnChunk& column, EntryRange range)
{
    auto raw = encode_basket(column, range);
    if (raw.size() > std::numeric_limits<std::uint32_t>::max())
        throw TreeFileError(TreeFileError::Kind::InvalidInput, "basket larger than 4 GiB");

    BasketIndexEntry entry;
    entry.first_entry = range.first;
    entry.n_entries = static_cast<std::uint32_t>(range.size());
    entry.offset = sink_.position();
    entry.raw_len = static_cast<std::uint32_t>(raw.size());
    entry.codec = options_.codec;

    Bytes stored;
    if (options_.codec == Codec::Deflate) {
        stored = compress_payload(raw, Codec::Deflate, options_.deflate_level);
        if (stored.size() >= raw.size()) {
            entry.codec = Codec::None;
            stored = std::move(raw);
        }
    } else {
        stored = std::move(raw);
    }
    entry.stored_len = static_cast<std::uint32_t>(stored.size());
    write_record(sink_, entry.codec, entry.raw_len, stored);
    return entry;
}

void TreeFileWriter::add_tree(const TreeData& tree)
{
    if (finished_)
        throw TreeFileError(TreeFileError::Kind::InvalidInput, "writer already finished");
    if (tree.name.empty())
        throw TreeFileError(TreeFileError::Kind::InvalidInput, "tree name must be non-empty");
    for (const auto& t : trees_)
        if (t.name == tree.name)
            throw TreeFileError(TreeFileError::Kind::InvalidInput, "duplicate tree name '" + tree.name + "'");

    auto n = tree.n_entries();
    std::set<std::string> names;
    for (const auto& b : tree.branches) {
        if (b.name.empty())
            throw TreeFileError(TreeFileError::Kind::InvalidInput, "branch name must be non-empty");
        if (!names.insert(b.name).second)
            throw TreeFileError(TreeFileError::Kind::InvalidInput, "duplicate branch name '" + b.name + "'");
        if (b.column.entries() != n)
            throw TreeFileError(TreeFileError::Kind::InvalidInput,
                                "branch '" + b.name + "' has " + std::to_string(b.column.entries()) +
                                    " entries, expected " + std::to_string(n));
        try {
            b.column.validate();
        } catch (const std::invalid_argument& e) {
            throw TreeFileError(TreeFileError::Kind::InvalidInput, "branch '" + b.name + "': " + e.what());
        }
    }

    TreeMeta meta;
    meta.name = tree.name;
    meta.n_entries = n;
    for (const auto& b : tree.branches) {
        BranchMeta bm;
        bm.name = b.name;
        bm.dtype = b.column.dtype;
        bm.shape = b.column.shape;
        auto base = b.column.range.first;
        for (std::uint64_t first = 0; first < n; first += options_.basket_target_entries) {
            auto last = std::min<std::uint64_t>(n, first + options_.basket_target_entries);
            auto entry = write_basket(b.column, {base + first, base + last});
            entry.first_entry = first;
            bm.baskets.push_back(entry);
        }
        meta.branches.push_back(std::move(bm));
    }
    trees_.push_back(std::move(meta));
}

TreeFileHeader TreeFileWriter::finish()
{
    if (finished_)
        throw TreeFileError(TreeFileError::Kind::InvalidInput, "writer already finished");
    finished_ = true;

    auto raw = encode_directory(trees_);
    auto stored = compress_payload(raw, Codec::Deflate, options_.deflate_level);
    Codec codec = Codec::Deflate;
    if (stored.size() >= raw.size()) {
        stored = raw;
        codec = Codec::None;
    }
    TreeFileHeader header;
    header.dir_offset = sink_.position();
    write_record(sink_, codec, static_cast<std::uint32_t>(raw.size()), stored);
    header.dir_len = sink_.position() - header.dir_offset;
    header.file_len = sink_.position();
    sink_.write_at(0, encode_header(header));
    return header;
}

TreeFileHeader write_tree(ByteSink& sink, const TreeData& tree, const WriteOptions& options)
{
    TreeFileWriter writer(sink, options);
    writer.add_tree(tree);
    return writer.finish();
}

}  // namespace treeduce
