#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace treeduce::expr::detail {

enum class Tok {
    Int,
    Float,
    Ident,
    True,
    False,
    LParen,
    RParen,
    Plus,
    Minus,
    Star,
    Slash,
    Bang,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    NotEq,
    AndAnd,
    OrOr,
    End,
};

struct Token
{
    Tok kind;
    std::string_view text;
    std::size_t offset;
};

std::vector<Token> tokenize(std::string_view text);

}  // namespace treeduce::expr::detail
