#pragma once

// Single-threaded reference for a reduction job: walks every event of the
// in-memory input trees, applies the skim and derived expressions with the
// per-event interpreter and records the surviving rows.

#include "support/naive_eval.hpp"
#include "treeduce/treefile.hpp"

#include <cstring>
#include <optional>
#include <string>
#include <vector>

namespace treeduce::testing {

struct NaiveRow
{
    std::vector<Bytes> kept;     // raw element bytes of each kept column
    std::vector<Atom> derived;

    bool operator==(const NaiveRow& o) const
    {
        if (kept != o.kept || derived.size() != o.derived.size())
            return false;
        for (std::size_t i = 0; i < derived.size(); ++i) {
            if (derived[i].index() != o.derived[i].index())
                return false;
            if (auto* d = std::get_if<double>(&derived[i])) {
                if (!same_double(*d, std::get<double>(o.derived[i])))
                    return false;
            } else if (derived[i] != o.derived[i]) {
                return false;
            }
        }
        return true;
    }
};

inline Bytes entry_bytes(const ColumnChunk& c, std::uint64_t row)
{
    std::uint64_t lo = row, hi = row + 1;
    if (c.shape == Shape::Jagged) {
        lo = c.offsets[row];
        hi = c.offsets[row + 1];
    }
    return std::visit(
        [&](const auto& vec) {
            using T = typename std::decay_t<decltype(vec)>::value_type;
            Bytes b((hi - lo) * sizeof(T));
            if (!b.empty())
                std::memcpy(b.data(), vec.data() + lo, b.size());
            return b;
        },
        c.values);
}

inline Atom chunk_atom(const ColumnChunk& c, std::uint64_t row)
{
    switch (c.dtype) {
    case DType::I32: return static_cast<std::int64_t>(c.as<std::int32_t>()[row]);
    case DType::I64: return c.as<std::int64_t>()[row];
    case DType::F32: return static_cast<double>(c.as<float>()[row]);
    case DType::F64: return c.as<double>()[row];
    case DType::Bool: return c.as<std::uint8_t>()[row] != 0;
    }
    return 0.0;
}

inline std::vector<NaiveRow> naive_reduce(const std::vector<TreeData>& inputs, const std::vector<std::string>& keep,
                                          const std::optional<std::string>& skim,
                                          const std::vector<std::string>& derived_exprs)
{
    std::vector<NaiveRow> rows;
    auto skim_ast = skim ? expr::parse(*skim) : nullptr;
    std::vector<expr::ExprPtr> derived;
    for (const auto& d : derived_exprs)
        derived.push_back(expr::parse(d));
    for (const auto& tree : inputs) {
        NaiveColumns cols;
        for (const auto& b : tree.branches)
            cols[b.name] = &b.column;
        NaiveInterpreter interp(cols);
        for (std::uint64_t row = 0; row < tree.n_entries(); ++row) {
            if (skim_ast && !std::get<bool>(interp.eval(*skim_ast, row).items.at(0)))
                continue;
            NaiveRow r;
            for (const auto& k : keep)
                r.kept.push_back(entry_bytes(*cols.at(k), row));
            for (const auto& d : derived)
                r.derived.push_back(interp.eval(*d, row).items.at(0));
            rows.push_back(std::move(r));
        }
    }
    return rows;
}

/// Same row form built from a reduced output tree.
inline std::vector<NaiveRow> output_rows(const TreeData& out, const std::vector<std::string>& keep,
                                         const std::vector<std::string>& derived_names)
{
    auto find = [&](const std::string& n) -> const ColumnChunk& {
        for (const auto& b : out.branches)
            if (b.name == n)
                return b.column;
        throw std::runtime_error("output lacks column " + n);
    };
    std::vector<NaiveRow> rows(out.n_entries());
    for (const auto& k : keep) {
        const auto& c = find(k);
        for (std::uint64_t r = 0; r < rows.size(); ++r)
            rows[r].kept.push_back(entry_bytes(c, r));
    }
    for (const auto& d : derived_names) {
        const auto& c = find(d);
        for (std::uint64_t r = 0; r < rows.size(); ++r)
            rows[r].derived.push_back(chunk_atom(c, r));
    }
    return rows;
}

}  // namespace treeduce::testing
