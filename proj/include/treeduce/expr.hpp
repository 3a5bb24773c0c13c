#pragma once

// Expression language for skim predicates, derived columns and histogram
// quantities.
//
//   expr    := or
//   or      := and ( "||" and )*
//   and     := cmp ( "&&" cmp )*
//   cmp     := sum ( ("<" | "<=" | ">" | ">=" | "==" | "!=") sum )*
//   sum     := product ( ("+" | "-") product )*
//   product := unary ( ("*" | "/") unary )*
//   unary   := ("-" | "!") unary | atom
//   atom    := number | "true" | "false" | ident | ident "(" expr ")" | "(" expr ")"
//
// Functions: count, sum, max, min (jagged -> scalar), abs, sqrt (elementwise).

#include "treeduce/column.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace treeduce::expr {

enum class UnaryOp { Neg, Not };
enum class BinaryOp { Add, Sub, Mul, Div, Lt, Le, Gt, Ge, Eq, Ne, And, Or };
enum class Func { Count, Sum, Max, Min, Abs, Sqrt };

std::string_view to_string(UnaryOp op);
std::string_view to_string(BinaryOp op);
std::string_view to_string(Func f);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Literal
{
    std::variant<double, std::int64_t, bool> value;
};

struct ColumnRef
{
    std::string name;
};

struct Unary
{
    UnaryOp op;
    ExprPtr operand;
};

struct Binary
{
    BinaryOp op;
    ExprPtr lhs;
    ExprPtr rhs;
};

struct Call
{
    Func func;
    ExprPtr arg;
};

/// Immutable AST node; `offset` is the byte position in the source text.
struct Expr
{
    std::variant<Literal, ColumnRef, Unary, Binary, Call> node;
    std::size_t offset = 0;
};

class ExprError : public std::runtime_error
{
public:
    enum class Kind {
        Syntax,
        UnknownFunction,
        UnknownColumn,
        TypeMismatch,
        AggregateOfScalar,
        JaggedLengthMismatch,
        IntegerDivisionByZero,
        MissingColumn,
    };

    ExprError(Kind kind, std::size_t offset, const std::string& message);

    [[nodiscard]] Kind kind() const { return kind_; }
    [[nodiscard]] std::size_t offset() const { return offset_; }

private:
    Kind kind_;
    std::size_t offset_;
};

ExprPtr parse(std::string_view text);

/// Canonical prefix form, e.g. "(&& (>= nMuon 2) (> (max Muon_pt) 20))".
std::string to_sexpr(const Expr& e);

/// Column names referenced anywhere in the tree.
std::set<std::string> column_refs(const Expr& e);

// ---------------------------------------------------------------------------
// Types

enum class Scalar { I64, F64, Bool };

struct Type
{
    Scalar scalar = Scalar::F64;
    bool jagged = false;

    friend bool operator==(const Type&, const Type&) = default;
};

std::string to_string(Type t);

struct ColumnType
{
    DType dtype;
    Shape shape;
};

using Schema = std::map<std::string, ColumnType, std::less<>>;

/// Promotes i32 -> i64 and f32 -> f64.
Type column_value_type(ColumnType c);

Type typecheck(const Expr& e, const Schema& schema);

/// Throws TypeMismatch unless the expression is a per-event boolean.
void require_scalar_bool(const Expr& e, const Schema& schema);

// ---------------------------------------------------------------------------
// Evaluation

/// Per-entry values over an entry range. Jagged values carry entries+1
/// offsets like ColumnChunk.
struct ValueColumn
{
    Type type;
    std::variant<std::vector<std::int64_t>, std::vector<double>, std::vector<std::uint8_t>> data;
    std::vector<std::uint64_t> offsets;

    [[nodiscard]] std::size_t entries() const;

    template <typename T>
    [[nodiscard]] const std::vector<T>& as() const { return std::get<std::vector<T>>(data); }
};

/// Input columns for one entry range; all chunks must share the same range.
class ColumnSet
{
public:
    ColumnSet() = default;
    explicit ColumnSet(EntryRange range) : range_(range) {}

    void add(std::string name, const ColumnChunk* chunk);
    [[nodiscard]] const ColumnChunk* find(std::string_view name) const;
    [[nodiscard]] EntryRange range() const { return range_; }
    [[nodiscard]] std::uint64_t entries() const { return range_.size(); }
    [[nodiscard]] Schema schema() const;

private:
    EntryRange range_;
    std::map<std::string, const ColumnChunk*, std::less<>> columns_;
};

/// Vectorized evaluation. Pure and reentrant.
ValueColumn evaluate(const Expr& e, const ColumnSet& columns);

/// Evaluates a scalar boolean predicate to a 0/1 mask.
std::vector<std::uint8_t> evaluate_mask(const Expr& e, const ColumnSet& columns);

/// Converts a flat value column to f64 (bool -> 0/1). Throws on jagged input.
std::vector<double> to_f64(const ValueColumn& v);

/// Materializes a flat value column as a column chunk: i64, f64 or bool.
ColumnChunk to_chunk(const ValueColumn& v, std::uint64_t first_entry = 0);

}  // namespace treeduce::expr
