#include "treeduce/expr.hpp"

#include <cmath>
#include <limits>

namespace treeduce::expr {

std::size_t ValueColumn::entries() const
{
    if (type.jagged)
        return offsets.empty() ? 0 : offsets.size() - 1;
    return std::visit([](const auto& v) { return v.size(); }, data);
}

void ColumnSet::add(std::string name, const ColumnChunk* chunk)
{
    if (chunk->range != range_)
        throw std::invalid_argument("column '" + name + "' covers a different entry range");
    columns_[std::move(name)] = chunk;
}

const ColumnChunk* ColumnSet::find(std::string_view name) const
{
    auto it = columns_.find(name);
    return it == columns_.end() ? nullptr : it->second;
}

Schema ColumnSet::schema() const
{
    Schema s;
    for (const auto& [name, chunk] : columns_)
        s.emplace(name, ColumnType{chunk->dtype, chunk->shape});
    return s;
}

namespace {

using I64s = std::vector<std::int64_t>;
using F64s = std::vector<double>;
using Bools = std::vector<std::uint8_t>;

std::int64_t wrap_add(std::int64_t a, std::int64_t b)
{
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) + static_cast<std::uint64_t>(b));
}
std::int64_t wrap_sub(std::int64_t a, std::int64_t b)
{
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) - static_cast<std::uint64_t>(b));
}
std::int64_t wrap_mul(std::int64_t a, std::int64_t b)
{
    return static_cast<std::int64_t>(static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(b));
}

F64s elements_f64(const ValueColumn& v)
{
    return std::visit(
        [](const auto& d) {
            F64s out(d.size());
            for (std::size_t i = 0; i < d.size(); ++i)
                out[i] = static_cast<double>(d[i]);
            return out;
        },
        v.data);
}

ValueColumn from_chunk(const ColumnChunk& c)
{
    ValueColumn v;
    v.type = column_value_type({c.dtype, c.shape});
    v.offsets = c.offsets;
    std::visit(
        [&](const auto& vec) {
            using T = typename std::decay_t<decltype(vec)>::value_type;
            if constexpr (std::is_same_v<T, std::int32_t> || std::is_same_v<T, std::int64_t>)
                v.data = I64s(vec.begin(), vec.end());
            else if constexpr (std::is_same_v<T, float> || std::is_same_v<T, double>)
                v.data = F64s(vec.begin(), vec.end());
            else
                v.data = Bools(vec.begin(), vec.end());
        },
        c.values);
    return v;
}

ValueColumn broadcast_literal(const Literal& lit, std::size_t n)
{
    ValueColumn v;
    std::visit(
        [&](auto x) {
            using X = decltype(x);
            if constexpr (std::is_same_v<X, double>) {
                v.type = {Scalar::F64, false};
                v.data = F64s(n, x);
            } else if constexpr (std::is_same_v<X, std::int64_t>) {
                v.type = {Scalar::I64, false};
                v.data = I64s(n, x);
            } else {
                v.type = {Scalar::Bool, false};
                v.data = Bools(n, x ? 1 : 0);
            }
        },
        lit.value);
    return v;
}

/// Repeats each per-event scalar once per element of the matching event.
ValueColumn expand(const ValueColumn& scalar, const std::vector<std::uint64_t>& offsets)
{
    ValueColumn v;
    v.type = {scalar.type.scalar, true};
    v.offsets = offsets;
    std::visit(
        [&](const auto& d) {
            std::decay_t<decltype(d)> out;
            out.reserve(offsets.back());
            for (std::size_t i = 0; i + 1 < offsets.size(); ++i)
                out.insert(out.end(), offsets[i + 1] - offsets[i], d[i]);
            v.data = std::move(out);
        },
        scalar.data);
    return v;
}

template <typename In, typename Out, typename Fn>
std::vector<Out> zip(const std::vector<In>& a, const std::vector<In>& b, Fn fn)
{
    std::vector<Out> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        out[i] = fn(a[i], b[i]);
    return out;
}

std::uint8_t cmp_result(BinaryOp op, auto a, auto b)
{
    switch (op) {
    case BinaryOp::Lt: return a < b;
    case BinaryOp::Le: return a <= b;
    case BinaryOp::Gt: return a > b;
    case BinaryOp::Ge: return a >= b;
    case BinaryOp::Eq: return a == b;
    case BinaryOp::Ne: return a != b;
    default: return 0;
    }
}

bool is_comparison(BinaryOp op)
{
    return op == BinaryOp::Lt || op == BinaryOp::Le || op == BinaryOp::Gt || op == BinaryOp::Ge ||
           op == BinaryOp::Eq || op == BinaryOp::Ne;
}

ValueColumn eval(const Expr& e, const ColumnSet& cols);

ValueColumn eval_binary(const Expr& e, const Binary& n, const ColumnSet& cols)
{
    auto l = eval(*n.lhs, cols);
    auto r = eval(*n.rhs, cols);
    std::vector<std::uint64_t> offsets;
    bool jagged = l.type.jagged || r.type.jagged;
    if (l.type.jagged && r.type.jagged) {
        if (l.offsets != r.offsets)
            throw ExprError(ExprError::Kind::JaggedLengthMismatch, e.offset,
                            "jagged operands of '" + std::string(to_string(n.op)) + "' differ in per-event length");
        offsets = l.offsets;
    } else if (l.type.jagged) {
        offsets = l.offsets;
        r = expand(r, offsets);
    } else if (r.type.jagged) {
        offsets = r.offsets;
        l = expand(l, offsets);
    }

    ValueColumn out;
    out.offsets = std::move(offsets);
    const auto op = n.op;

    if (op == BinaryOp::And || op == BinaryOp::Or) {
        out.type = {Scalar::Bool, jagged};
        const auto& a = std::get<Bools>(l.data);
        const auto& b = std::get<Bools>(r.data);
        out.data = op == BinaryOp::And ? zip<std::uint8_t, std::uint8_t>(a, b, [](auto x, auto y) { return x & y; })
                                       : zip<std::uint8_t, std::uint8_t>(a, b, [](auto x, auto y) { return x | y; });
        return out;
    }

    if (is_comparison(op)) {
        out.type = {Scalar::Bool, jagged};
        if (l.type.scalar == Scalar::Bool && r.type.scalar == Scalar::Bool) {
            out.data = zip<std::uint8_t, std::uint8_t>(std::get<Bools>(l.data), std::get<Bools>(r.data),
                                                       [op](auto x, auto y) { return cmp_result(op, x, y); });
        } else if (l.type.scalar == Scalar::I64 && r.type.scalar == Scalar::I64) {
            out.data = zip<std::int64_t, std::uint8_t>(std::get<I64s>(l.data), std::get<I64s>(r.data),
                                                       [op](auto x, auto y) { return cmp_result(op, x, y); });
        } else {
            out.data = zip<double, std::uint8_t>(elements_f64(l), elements_f64(r),
                                                 [op](auto x, auto y) { return cmp_result(op, x, y); });
        }
        return out;
    }

    if (l.type.scalar == Scalar::I64 && r.type.scalar == Scalar::I64) {
        out.type = {Scalar::I64, jagged};
        const auto& a = std::get<I64s>(l.data);
        const auto& b = std::get<I64s>(r.data);
        switch (op) {
        case BinaryOp::Add: out.data = zip<std::int64_t, std::int64_t>(a, b, wrap_add); break;
        case BinaryOp::Sub: out.data = zip<std::int64_t, std::int64_t>(a, b, wrap_sub); break;
        case BinaryOp::Mul: out.data = zip<std::int64_t, std::int64_t>(a, b, wrap_mul); break;
        default: {
            I64s q(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) {
                if (b[i] == 0)
                    throw ExprError(ExprError::Kind::IntegerDivisionByZero, e.offset, "integer division by zero");
                if (a[i] == std::numeric_limits<std::int64_t>::min() && b[i] == -1)
                    q[i] = a[i];
                else
                    q[i] = a[i] / b[i];
            }
            out.data = std::move(q);
        }
        }
        return out;
    }

    out.type = {Scalar::F64, jagged};
    auto a = elements_f64(l);
    auto b = elements_f64(r);
    switch (op) {
    case BinaryOp::Add: out.data = zip<double, double>(a, b, [](double x, double y) { return x + y; }); break;
    case BinaryOp::Sub: out.data = zip<double, double>(a, b, [](double x, double y) { return x - y; }); break;
    case BinaryOp::Mul: out.data = zip<double, double>(a, b, [](double x, double y) { return x * y; }); break;
    default: out.data = zip<double, double>(a, b, [](double x, double y) { return x / y; }); break;
    }
    return out;
}

ValueColumn eval_call(const Call& n, const ColumnSet& cols)
{
    auto arg = eval(*n.arg, cols);
    ValueColumn out;
    if (n.func == Func::Abs) {
        out.type = arg.type;
        out.offsets = std::move(arg.offsets);
        if (auto* p = std::get_if<I64s>(&arg.data)) {
            for (auto& x : *p)
                x = x < 0 ? wrap_sub(0, x) : x;
            out.data = std::move(*p);
        } else {
            auto& d = std::get<F64s>(arg.data);
            for (auto& x : d)
                x = std::fabs(x);
            out.data = std::move(d);
        }
        return out;
    }
    if (n.func == Func::Sqrt) {
        out.type = {Scalar::F64, arg.type.jagged};
        auto d = elements_f64(arg);
        for (auto& x : d)
            x = std::sqrt(x);
        out.offsets = std::move(arg.offsets);
        out.data = std::move(d);
        return out;
    }

    const auto& off = arg.offsets;
    const std::size_t n_events = off.size() - 1;
    out.type.jagged = false;
    switch (n.func) {
    case Func::Count: {
        out.type.scalar = Scalar::I64;
        I64s c(n_events);
        for (std::size_t i = 0; i < n_events; ++i)
            c[i] = static_cast<std::int64_t>(off[i + 1] - off[i]);
        out.data = std::move(c);
        break;
    }
    case Func::Sum: {
        out.type.scalar = arg.type.scalar;
        if (const auto* p = std::get_if<I64s>(&arg.data)) {
            I64s s(n_events, 0);
            for (std::size_t i = 0; i < n_events; ++i)
                for (auto k = off[i]; k < off[i + 1]; ++k)
                    s[i] = wrap_add(s[i], (*p)[k]);
            out.data = std::move(s);
        } else {
            const auto& d = std::get<F64s>(arg.data);
            F64s s(n_events, 0.0);
            for (std::size_t i = 0; i < n_events; ++i)
                for (auto k = off[i]; k < off[i + 1]; ++k)
                    s[i] += d[k];
            out.data = std::move(s);
        }
        break;
    }
    default: {
        // NaN elements are skipped; an event with no other elements yields NaN.
        // Among equal values the first one wins (matters only for signed zeros).
        out.type.scalar = Scalar::F64;
        auto d = elements_f64(arg);
        const bool is_max = n.func == Func::Max;
        F64s m(n_events, std::numeric_limits<double>::quiet_NaN());
        for (std::size_t i = 0; i < n_events; ++i) {
            double best = m[i];
            for (auto k = off[i]; k < off[i + 1]; ++k) {
                double x = d[k];
                if (std::isnan(x))
                    continue;
                if (std::isnan(best) || (is_max ? x > best : x < best))
                    best = x;
            }
            m[i] = best;
        }
        out.data = std::move(m);
    }
    }
    return out;
}

ValueColumn eval(const Expr& e, const ColumnSet& cols)
{
    return std::visit(
        [&](const auto& n) -> ValueColumn {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Literal>) {
                return broadcast_literal(n, cols.entries());
            } else if constexpr (std::is_same_v<N, ColumnRef>) {
                const auto* c = cols.find(n.name);
                if (!c)
                    throw ExprError(ExprError::Kind::MissingColumn, e.offset,
                                    "column '" + n.name + "' not loaded for evaluation");
                return from_chunk(*c);
            } else if constexpr (std::is_same_v<N, Unary>) {
                auto v = eval(*n.operand, cols);
                if (n.op == UnaryOp::Not) {
                    for (auto& b : std::get<Bools>(v.data))
                        b = b ? 0 : 1;
                } else if (auto* p = std::get_if<I64s>(&v.data)) {
                    for (auto& x : *p)
                        x = wrap_sub(0, x);
                } else {
                    for (auto& x : std::get<F64s>(v.data))
                        x = -x;
                }
                return v;
            } else if constexpr (std::is_same_v<N, Binary>) {
                return eval_binary(e, n, cols);
            } else {
                return eval_call(n, cols);
            }
        },
        e.node);
}

}  // namespace

ValueColumn evaluate(const Expr& e, const ColumnSet& columns) { return eval(e, columns); }

std::vector<std::uint8_t> evaluate_mask(const Expr& e, const ColumnSet& columns)
{
    auto v = eval(e, columns);
    if (v.type != Type{Scalar::Bool, false})
        throw ExprError(ExprError::Kind::TypeMismatch, e.offset, "predicate is not a per-event bool");
    return std::get<Bools>(std::move(v.data));
}

std::vector<double> to_f64(const ValueColumn& v)
{
    if (v.type.jagged)
        throw ExprError(ExprError::Kind::TypeMismatch, 0, "expected a per-event scalar, got a jagged value");
    return elements_f64(v);
}

ColumnChunk to_chunk(const ValueColumn& v, std::uint64_t first_entry)
{
    if (v.type.jagged)
        throw ExprError(ExprError::Kind::TypeMismatch, 0, "derived columns must be per-event scalars");
    return std::visit([&](const auto& d) { return ColumnChunk::flat(d, first_entry); }, v.data);
}

}  // namespace treeduce::expr
