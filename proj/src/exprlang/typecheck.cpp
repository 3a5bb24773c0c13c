#include "treeduce/expr.hpp"

namespace treeduce::expr {

std::string to_string(Type t)
{
    std::string s = t.scalar == Scalar::I64 ? "i64" : t.scalar == Scalar::F64 ? "f64" : "bool";
    return t.jagged ? "jagged " + s : s;
}

Type column_value_type(ColumnType c)
{
    Type t;
    t.jagged = c.shape == Shape::Jagged;
    switch (c.dtype) {
    case DType::I32:
    case DType::I64: t.scalar = Scalar::I64; break;
    case DType::F32:
    case DType::F64: t.scalar = Scalar::F64; break;
    case DType::Bool: t.scalar = Scalar::Bool; break;
    }
    return t;
}

namespace {

bool numeric(Type t) { return t.scalar != Scalar::Bool; }

Scalar promote(Scalar a, Scalar b)
{
    return (a == Scalar::F64 || b == Scalar::F64) ? Scalar::F64 : Scalar::I64;
}

[[noreturn]] void mismatch(const Expr& e, const std::string& message)
{
    throw ExprError(ExprError::Kind::TypeMismatch, e.offset, message);
}

Type check(const Expr& e, const Schema& schema)
{
    return std::visit(
        [&](const auto& n) -> Type {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Literal>) {
                if (std::holds_alternative<double>(n.value))
                    return {Scalar::F64, false};
                if (std::holds_alternative<std::int64_t>(n.value))
                    return {Scalar::I64, false};
                return {Scalar::Bool, false};
            } else if constexpr (std::is_same_v<N, ColumnRef>) {
                auto it = schema.find(n.name);
                if (it == schema.end())
                    throw ExprError(ExprError::Kind::UnknownColumn, e.offset, "unknown column '" + n.name + "'");
                return column_value_type(it->second);
            } else if constexpr (std::is_same_v<N, Unary>) {
                auto t = check(*n.operand, schema);
                if (n.op == UnaryOp::Neg && !numeric(t))
                    mismatch(e, "unary '-' needs a numeric operand, got " + to_string(t));
                if (n.op == UnaryOp::Not && t.scalar != Scalar::Bool)
                    mismatch(e, "'!' needs a bool operand, got " + to_string(t));
                return t;
            } else if constexpr (std::is_same_v<N, Binary>) {
                auto l = check(*n.lhs, schema);
                auto r = check(*n.rhs, schema);
                const bool jagged = l.jagged || r.jagged;
                const auto op_text = std::string(to_string(n.op));
                switch (n.op) {
                case BinaryOp::Add:
                case BinaryOp::Sub:
                case BinaryOp::Mul:
                case BinaryOp::Div:
                    if (!numeric(l) || !numeric(r))
                        mismatch(e, "'" + op_text + "' needs numeric operands, got " + to_string(l) + " and " +
                                        to_string(r));
                    return {promote(l.scalar, r.scalar), jagged};
                case BinaryOp::Lt:
                case BinaryOp::Le:
                case BinaryOp::Gt:
                case BinaryOp::Ge:
                    if (!numeric(l) || !numeric(r))
                        mismatch(e, "'" + op_text + "' needs numeric operands, got " + to_string(l) + " and " +
                                        to_string(r));
                    return {Scalar::Bool, jagged};
                case BinaryOp::Eq:
                case BinaryOp::Ne:
                    if (numeric(l) != numeric(r))
                        mismatch(e, "'" + op_text + "' cannot compare " + to_string(l) + " with " + to_string(r));
                    return {Scalar::Bool, jagged};
                case BinaryOp::And:
                case BinaryOp::Or:
                    if (l.scalar != Scalar::Bool || r.scalar != Scalar::Bool)
                        mismatch(e, "'" + op_text + "' needs bool operands, got " + to_string(l) + " and " +
                                        to_string(r));
                    return {Scalar::Bool, jagged};
                }
                mismatch(e, "unknown operator");
            } else {
                auto t = check(*n.arg, schema);
                const auto name = std::string(to_string(n.func));
                switch (n.func) {
                case Func::Count:
                case Func::Sum:
                case Func::Max:
                case Func::Min:
                    if (!t.jagged)
                        throw ExprError(ExprError::Kind::AggregateOfScalar, e.offset,
                                        name + "() needs a jagged argument, got " + to_string(t));
                    if (n.func == Func::Count)
                        return {Scalar::I64, false};
                    if (!numeric(t))
                        mismatch(e, name + "() needs numeric elements, got " + to_string(t));
                    if (n.func == Func::Sum)
                        return {t.scalar, false};
                    return {Scalar::F64, false};
                case Func::Abs:
                    if (!numeric(t))
                        mismatch(e, "abs() needs a numeric argument, got " + to_string(t));
                    return t;
                case Func::Sqrt:
                    if (!numeric(t))
                        mismatch(e, "sqrt() needs a numeric argument, got " + to_string(t));
                    return {Scalar::F64, t.jagged};
                }
                mismatch(e, "unknown function");
            }
        },
        e.node);
}

}  // namespace

Type typecheck(const Expr& e, const Schema& schema) { return check(e, schema); }

void require_scalar_bool(const Expr& e, const Schema& schema)
{
    auto t = check(e, schema);
    if (t != Type{Scalar::Bool, false})
        throw ExprError(ExprError::Kind::TypeMismatch, e.offset,
                        "predicate must be a per-event bool, got " + to_string(t));
}

}  // namespace treeduce::expr
