#include "lexer.hpp"

#include "treeduce/expr.hpp"

#include <charconv>
#include <optional>
#include <cmath>
#include <sstream>

namespace treeduce::expr {

using detail::Tok;
using detail::Token;

ExprError::ExprError(Kind kind, std::size_t offset, const std::string& message)
    : std::runtime_error(message + " (at offset " + std::to_string(offset) + ")"), kind_(kind), offset_(offset)
{
}

std::string_view to_string(UnaryOp op) { return op == UnaryOp::Neg ? "-" : "!"; }

std::string_view to_string(BinaryOp op)
{
    switch (op) {
    case BinaryOp::Add: return "+";
    case BinaryOp::Sub: return "-";
    case BinaryOp::Mul: return "*";
    case BinaryOp::Div: return "/";
    case BinaryOp::Lt: return "<";
    case BinaryOp::Le: return "<=";
    case BinaryOp::Gt: return ">";
    case BinaryOp::Ge: return ">=";
    case BinaryOp::Eq: return "==";
    case BinaryOp::Ne: return "!=";
    case BinaryOp::And: return "&&";
    case BinaryOp::Or: return "||";
    }
    return "?";
}

std::string_view to_string(Func f)
{
    switch (f) {
    case Func::Count: return "count";
    case Func::Sum: return "sum";
    case Func::Max: return "max";
    case Func::Min: return "min";
    case Func::Abs: return "abs";
    case Func::Sqrt: return "sqrt";
    }
    return "?";
}

namespace {

ExprPtr make(std::size_t offset, auto node)
{
    return std::make_shared<const Expr>(Expr{std::move(node), offset});
}

std::optional<Func> lookup_function(std::string_view name)
{
    for (auto f : {Func::Count, Func::Sum, Func::Max, Func::Min, Func::Abs, Func::Sqrt})
        if (to_string(f) == name)
            return f;
    return std::nullopt;
}

std::string describe(const Token& t)
{
    if (t.kind == Tok::End)
        return "end of input";
    return "'" + std::string(t.text) + "'";
}

class Parser
{
public:
    explicit Parser(std::vector<Token> tokens) : toks_(std::move(tokens)) {}

    ExprPtr parse_all()
    {
        auto e = parse_or();
        if (peek().kind != Tok::End)
            fail("unexpected " + describe(peek()));
        return e;
    }

private:
    const Token& peek() const { return toks_[pos_]; }
    const Token& next() { return toks_[pos_++]; }

    bool accept(Tok k)
    {
        if (peek().kind != k)
            return false;
        ++pos_;
        return true;
    }

    [[noreturn]] void fail(const std::string& message) const
    {
        throw ExprError(ExprError::Kind::Syntax, peek().offset, message);
    }

    ExprPtr binary_level(ExprPtr (Parser::*sub)(), std::initializer_list<std::pair<Tok, BinaryOp>> ops)
    {
        auto lhs = (this->*sub)();
        for (;;) {
            const auto& t = peek();
            bool matched = false;
            for (auto [tok, op] : ops) {
                if (t.kind == tok) {
                    auto offset = t.offset;
                    ++pos_;
                    auto rhs = (this->*sub)();
                    lhs = make(offset, Binary{op, std::move(lhs), std::move(rhs)});
                    matched = true;
                    break;
                }
            }
            if (!matched)
                return lhs;
        }
    }

    ExprPtr parse_or() { return binary_level(&Parser::parse_and, {{Tok::OrOr, BinaryOp::Or}}); }
    ExprPtr parse_and() { return binary_level(&Parser::parse_cmp, {{Tok::AndAnd, BinaryOp::And}}); }

    ExprPtr parse_cmp()
    {
        return binary_level(&Parser::parse_sum, {{Tok::Lt, BinaryOp::Lt},
                                                 {Tok::Le, BinaryOp::Le},
                                                 {Tok::Gt, BinaryOp::Gt},
                                                 {Tok::Ge, BinaryOp::Ge},
                                                 {Tok::EqEq, BinaryOp::Eq},
                                                 {Tok::NotEq, BinaryOp::Ne}});
    }

    ExprPtr parse_sum()
    {
        return binary_level(&Parser::parse_product, {{Tok::Plus, BinaryOp::Add}, {Tok::Minus, BinaryOp::Sub}});
    }

    ExprPtr parse_product()
    {
        return binary_level(&Parser::parse_unary, {{Tok::Star, BinaryOp::Mul}, {Tok::Slash, BinaryOp::Div}});
    }

    ExprPtr parse_unary()
    {
        const auto& t = peek();
        if (t.kind == Tok::Minus || t.kind == Tok::Bang) {
            auto offset = t.offset;
            auto op = t.kind == Tok::Minus ? UnaryOp::Neg : UnaryOp::Not;
            ++pos_;
            return make(offset, Unary{op, parse_unary()});
        }
        return parse_atom();
    }

    ExprPtr parse_atom()
    {
        const auto& t = peek();
        switch (t.kind) {
        case Tok::Int: {
            std::int64_t v = 0;
            auto [ptr, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
            if (ec != std::errc{} || ptr != t.text.data() + t.text.size())
                fail("integer literal out of range");
            next();
            return make(t.offset, Literal{v});
        }
        case Tok::Float: {
            double v = std::strtod(std::string(t.text).c_str(), nullptr);
            next();
            return make(t.offset, Literal{v});
        }
        case Tok::True:
        case Tok::False: {
            bool v = t.kind == Tok::True;
            next();
            return make(t.offset, Literal{v});
        }
        case Tok::Ident: {
            const auto& ident = next();
            if (peek().kind == Tok::LParen) {
                auto f = lookup_function(ident.text);
                if (!f)
                    throw ExprError(ExprError::Kind::UnknownFunction, ident.offset,
                                    "unknown function '" + std::string(ident.text) + "'");
                next();
                auto arg = parse_or();
                if (!accept(Tok::RParen))
                    fail("expected ')' after function argument, found " + describe(peek()));
                return make(ident.offset, Call{*f, std::move(arg)});
            }
            return make(ident.offset, ColumnRef{std::string(ident.text)});
        }
        case Tok::LParen: {
            next();
            auto inner = parse_or();
            if (!accept(Tok::RParen))
                fail("expected ')', found " + describe(peek()));
            return inner;
        }
        default: fail("expected an operand, found " + describe(t));
        }
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
};

void collect_refs(const Expr& e, std::set<std::string>& out)
{
    std::visit(
        [&](const auto& n) {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, ColumnRef>)
                out.insert(n.name);
            else if constexpr (std::is_same_v<N, Unary>)
                collect_refs(*n.operand, out);
            else if constexpr (std::is_same_v<N, Binary>) {
                collect_refs(*n.lhs, out);
                collect_refs(*n.rhs, out);
            } else if constexpr (std::is_same_v<N, Call>)
                collect_refs(*n.arg, out);
        },
        e.node);
}

}  // namespace

ExprPtr parse(std::string_view text)
{
    return Parser(detail::tokenize(text)).parse_all();
}

std::string to_sexpr(const Expr& e)
{
    return std::visit(
        [](const auto& n) -> std::string {
            using N = std::decay_t<decltype(n)>;
            if constexpr (std::is_same_v<N, Literal>) {
                return std::visit(
                    [](auto v) -> std::string {
                        if constexpr (std::is_same_v<decltype(v), bool>)
                            return v ? "true" : "false";
                        else if constexpr (std::is_same_v<decltype(v), std::int64_t>)
                            return std::to_string(v);
                        else {
                            std::ostringstream os;
                            os.precision(17);
                            os << v;
                            auto s = os.str();
                            if (s.find_first_of(".eEn") == std::string::npos)
                                s += ".0";
                            return s;
                        }
                    },
                    n.value);
            } else if constexpr (std::is_same_v<N, ColumnRef>) {
                return n.name;
            } else if constexpr (std::is_same_v<N, Unary>) {
                return "(" + std::string(to_string(n.op)) + " " + to_sexpr(*n.operand) + ")";
            } else if constexpr (std::is_same_v<N, Binary>) {
                return "(" + std::string(to_string(n.op)) + " " + to_sexpr(*n.lhs) + " " + to_sexpr(*n.rhs) + ")";
            } else {
                return "(" + std::string(to_string(n.func)) + " " + to_sexpr(*n.arg) + ")";
            }
        },
        e.node);
}

std::set<std::string> column_refs(const Expr& e)
{
    std::set<std::string> out;
    collect_refs(e, out);
    return out;
}

}  // namespace treeduce::expr
