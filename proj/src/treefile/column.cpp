#include "treeduce/column.hpp"

#include <algorithm>
#include <bit>
#include <cstring>

namespace treeduce {

std::string_view to_string(DType t)
{
    switch (t) {
    case DType::I32: return "i32";
    case DType::I64: return "i64";
    case DType::F32: return "f32";
    case DType::F64: return "f64";
    case DType::Bool: return "bool";
    }
    return "?";
}

std::string_view to_string(Shape s)
{
    return s == Shape::Flat ? "flat" : "jagged";
}

std::size_t element_size(DType t)
{
    switch (t) {
    case DType::I32:
    case DType::F32: return 4;
    case DType::I64:
    case DType::F64: return 8;
    case DType::Bool: return 1;
    }
    throw std::invalid_argument("unsupported dtype");
}

ColumnValues make_values(DType t)
{
    switch (t) {
    case DType::I32: return std::vector<std::int32_t>{};
    case DType::I64: return std::vector<std::int64_t>{};
    case DType::F32: return std::vector<float>{};
    case DType::F64: return std::vector<double>{};
    case DType::Bool: return std::vector<std::uint8_t>{};
    }
    throw std::invalid_argument("unsupported dtype " + std::to_string(static_cast<int>(t)));
}

DType values_dtype(const ColumnValues& v)
{
    static constexpr DType order[] = {DType::I32, DType::I64, DType::F32, DType::F64, DType::Bool};
    return order[v.index()];
}

std::size_t values_size(const ColumnValues& v)
{
    return std::visit([](const auto& vec) { return vec.size(); }, v);
}

void ColumnChunk::validate() const
{
    if (range.last < range.first)
        throw std::invalid_argument("entry range is reversed");
    if (values_dtype(values) != dtype)
        throw std::invalid_argument("value storage does not match dtype " + std::string(to_string(dtype)));
    auto n = entries();
    if (shape == Shape::Flat) {
        if (!offsets.empty())
            throw std::invalid_argument("flat column carries offsets");
        if (element_count() != n)
            throw std::invalid_argument("flat column has " + std::to_string(element_count()) + " values for " +
                                        std::to_string(n) + " entries");
    } else {
        if (offsets.size() != n + 1)
            throw std::invalid_argument("jagged column needs entries+1 offsets");
        if (offsets.front() != 0)
            throw std::invalid_argument("jagged offsets must start at 0");
        if (!std::is_sorted(offsets.begin(), offsets.end()))
            throw std::invalid_argument("jagged offsets must be nondecreasing");
        if (offsets.back() != element_count())
            throw std::invalid_argument("jagged offsets do not cover the element array");
    }
    if (dtype == DType::Bool) {
        const auto& b = std::get<std::vector<std::uint8_t>>(values);
        if (std::any_of(b.begin(), b.end(), [](std::uint8_t x) { return x > 1; }))
            throw std::invalid_argument("bool column holds a value other than 0/1");
    }
}

ColumnChunk ColumnChunk::slice(EntryRange local) const
{
    if (local.last < local.first || local.last > entries())
        throw std::out_of_range("slice outside chunk");
    ColumnChunk out;
    out.dtype = dtype;
    out.shape = shape;
    out.range = {range.first + local.first, range.first + local.last};
    std::size_t lo = local.first;
    std::size_t hi = local.last;
    if (shape == Shape::Jagged) {
        lo = offsets[local.first];
        hi = offsets[local.last];
        out.offsets.reserve(local.size() + 1);
        for (auto i = local.first; i <= local.last; ++i)
            out.offsets.push_back(offsets[i] - lo);
    }
    out.values = std::visit(
        [&](const auto& vec) -> ColumnValues {
            using V = std::decay_t<decltype(vec)>;
            return V(vec.begin() + static_cast<std::ptrdiff_t>(lo), vec.begin() + static_cast<std::ptrdiff_t>(hi));
        },
        values);
    return out;
}

ColumnChunk ColumnChunk::select(const std::vector<std::uint8_t>& mask) const
{
    if (mask.size() != entries())
        throw std::invalid_argument("selection mask length differs from entry count");
    ColumnChunk out;
    out.dtype = dtype;
    out.shape = shape;
    std::uint64_t kept = 0;
    for (auto m : mask)
        kept += m ? 1 : 0;
    out.range = {0, kept};
    out.values = std::visit(
        [&](const auto& vec) -> ColumnValues {
            using V = std::decay_t<decltype(vec)>;
            V sel;
            if (shape == Shape::Flat) {
                sel.reserve(kept);
                for (std::size_t i = 0; i < mask.size(); ++i)
                    if (mask[i])
                        sel.push_back(vec[i]);
            } else {
                for (std::size_t i = 0; i < mask.size(); ++i)
                    if (mask[i])
                        sel.insert(sel.end(), vec.begin() + static_cast<std::ptrdiff_t>(offsets[i]),
                                   vec.begin() + static_cast<std::ptrdiff_t>(offsets[i + 1]));
            }
            return sel;
        },
        values);
    if (shape == Shape::Jagged) {
        out.offsets.reserve(kept + 1);
        out.offsets.push_back(0);
        for (std::size_t i = 0; i < mask.size(); ++i)
            if (mask[i])
                out.offsets.push_back(out.offsets.back() + (offsets[i + 1] - offsets[i]));
    }
    return out;
}

void ColumnChunk::append(const ColumnChunk& other)
{
    if (other.dtype != dtype || other.shape != shape)
        throw std::invalid_argument("cannot append columns of different type");
    std::visit(
        [&](auto& vec) {
            using V = std::decay_t<decltype(vec)>;
            const auto& src = std::get<V>(other.values);
            vec.insert(vec.end(), src.begin(), src.end());
        },
        values);
    if (shape == Shape::Jagged) {
        if (offsets.empty())
            offsets.push_back(0);
        auto base = offsets.back();
        for (std::size_t i = 1; i < other.offsets.size(); ++i)
            offsets.push_back(base + other.offsets[i]);
    }
    range.last += other.entries();
}

bool ColumnChunk::same_content(const ColumnChunk& other) const
{
    if (dtype != other.dtype || shape != other.shape || entries() != other.entries())
        return false;
    if (shape == Shape::Jagged && offsets != other.offsets)
        return false;
    return std::visit(
        [&](const auto& vec) {
            using V = std::decay_t<decltype(vec)>;
            const auto& rhs = std::get<V>(other.values);
            if (vec.size() != rhs.size())
                return false;
            return vec.empty() || std::memcmp(vec.data(), rhs.data(), vec.size() * sizeof(vec[0])) == 0;
        },
        values);
}

ColumnChunk ColumnChunk::flat(ColumnValues values, std::uint64_t first)
{
    ColumnChunk c;
    c.dtype = values_dtype(values);
    c.shape = Shape::Flat;
    c.range = {first, first + values_size(values)};
    c.values = std::move(values);
    return c;
}

ColumnChunk ColumnChunk::jagged(ColumnValues values, std::vector<std::uint64_t> offsets, std::uint64_t first)
{
    if (offsets.empty())
        offsets.push_back(0);
    ColumnChunk c;
    c.dtype = values_dtype(values);
    c.shape = Shape::Jagged;
    c.range = {first, first + offsets.size() - 1};
    c.values = std::move(values);
    c.offsets = std::move(offsets);
    return c;
}

ColumnChunk ColumnChunk::jagged_from_lengths(ColumnValues values, const std::vector<std::uint64_t>& lengths,
                                             std::uint64_t first)
{
    std::vector<std::uint64_t> offsets{0};
    offsets.reserve(lengths.size() + 1);
    for (auto n : lengths)
        offsets.push_back(offsets.back() + n);
    return jagged(std::move(values), std::move(offsets), first);
}

}  // namespace treeduce
