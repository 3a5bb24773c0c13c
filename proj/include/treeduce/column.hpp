#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace treeduce {

enum class DType : std::uint8_t { I32 = 1, I64 = 2, F32 = 3, F64 = 4, Bool = 5 };
enum class Shape : std::uint8_t { Flat = 0, Jagged = 1 };

std::string_view to_string(DType t);
std::string_view to_string(Shape s);
std::size_t element_size(DType t);

/// Half-open entry interval [first, last).
struct EntryRange
{
    std::uint64_t first = 0;
    std::uint64_t last = 0;

    [[nodiscard]] std::uint64_t size() const { return last - first; }
    [[nodiscard]] bool empty() const { return first == last; }
    friend bool operator==(const EntryRange&, const EntryRange&) = default;
};

/// Element storage; bool is kept as one byte per element holding 0 or 1.
using ColumnValues = std::variant<std::vector<std::int32_t>,
                                  std::vector<std::int64_t>,
                                  std::vector<float>,
                                  std::vector<double>,
                                  std::vector<std::uint8_t>>;

ColumnValues make_values(DType t);
DType values_dtype(const ColumnValues& v);
std::size_t values_size(const ColumnValues& v);

/// A decoded slice of one branch. Flat: one element per entry. Jagged:
/// offsets has entries()+1 cumulative counts starting at 0.
struct ColumnChunk
{
    DType dtype = DType::F64;
    Shape shape = Shape::Flat;
    EntryRange range;
    ColumnValues values = std::vector<double>{};
    std::vector<std::uint64_t> offsets;

    [[nodiscard]] std::uint64_t entries() const { return range.size(); }
    [[nodiscard]] std::size_t element_count() const { return values_size(values); }

    /// Throws std::invalid_argument describing the first broken invariant.
    void validate() const;

    /// Entries [range.first + local.first, range.first + local.last) with
    /// rebased offsets.
    [[nodiscard]] ColumnChunk slice(EntryRange local) const;

    /// Keeps entries whose mask byte is non-zero; mask.size() == entries().
    [[nodiscard]] ColumnChunk select(const std::vector<std::uint8_t>& mask) const;

    /// Appends `other` (same dtype and shape); the entry range grows by
    /// other.entries().
    void append(const ColumnChunk& other);

    /// Bit-exact equality of dtype, shape, offsets and element bits. The entry
    /// range is ignored.
    [[nodiscard]] bool same_content(const ColumnChunk& other) const;

    template <typename T>
    [[nodiscard]] const std::vector<T>& as() const { return std::get<std::vector<T>>(values); }

    static ColumnChunk flat(ColumnValues values, std::uint64_t first = 0);
    static ColumnChunk jagged(ColumnValues values, std::vector<std::uint64_t> offsets, std::uint64_t first = 0);
    /// Builds a jagged chunk from per-entry lengths.
    static ColumnChunk jagged_from_lengths(ColumnValues values, const std::vector<std::uint64_t>& lengths,
                                           std::uint64_t first = 0);
};

}  // namespace treeduce
