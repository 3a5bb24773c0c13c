#include "lexer.hpp"

#include "treeduce/expr.hpp"

#include <cctype>

namespace treeduce::expr::detail {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

}  // namespace

std::vector<Token> tokenize(std::string_view text)
{
    std::vector<Token> out;
    std::size_t i = 0;
    const auto n = text.size();
    auto push = [&](Tok k, std::size_t start, std::size_t len) { out.push_back({k, text.substr(start, len), start}); };

    while (i < n) {
        char c = text[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        const auto start = i;
        if (ident_start(c)) {
            while (i < n && ident_char(text[i]))
                ++i;
            auto word = text.substr(start, i - start);
            push(word == "true" ? Tok::True : word == "false" ? Tok::False : Tok::Ident, start, i - start);
            continue;
        }
        if (digit(c) || (c == '.' && i + 1 < n && digit(text[i + 1]))) {
            bool is_float = false;
            while (i < n && digit(text[i]))
                ++i;
            if (i < n && text[i] == '.') {
                is_float = true;
                ++i;
                while (i < n && digit(text[i]))
                    ++i;
            }
            if (i < n && (text[i] == 'e' || text[i] == 'E')) {
                std::size_t j = i + 1;
                if (j < n && (text[j] == '+' || text[j] == '-'))
                    ++j;
                if (j < n && digit(text[j])) {
                    is_float = true;
                    i = j;
                    while (i < n && digit(text[i]))
                        ++i;
                } else {
                    throw ExprError(ExprError::Kind::Syntax, j, "malformed exponent");
                }
            }
            if (i < n && ident_char(text[i]))
                throw ExprError(ExprError::Kind::Syntax, i, "unexpected character after number");
            push(is_float ? Tok::Float : Tok::Int, start, i - start);
            continue;
        }
        auto two = [&](char next) { return i + 1 < n && text[i + 1] == next; };
        switch (c) {
        case '(': push(Tok::LParen, start, 1); ++i; break;
        case ')': push(Tok::RParen, start, 1); ++i; break;
        case '+': push(Tok::Plus, start, 1); ++i; break;
        case '-': push(Tok::Minus, start, 1); ++i; break;
        case '*': push(Tok::Star, start, 1); ++i; break;
        case '/': push(Tok::Slash, start, 1); ++i; break;
        case '<':
            if (two('=')) { push(Tok::Le, start, 2); i += 2; }
            else { push(Tok::Lt, start, 1); ++i; }
            break;
        case '>':
            if (two('=')) { push(Tok::Ge, start, 2); i += 2; }
            else { push(Tok::Gt, start, 1); ++i; }
            break;
        case '!':
            if (two('=')) { push(Tok::NotEq, start, 2); i += 2; }
            else { push(Tok::Bang, start, 1); ++i; }
            break;
        case '=':
            if (!two('='))
                throw ExprError(ExprError::Kind::Syntax, start, "expected '=='");
            push(Tok::EqEq, start, 2);
            i += 2;
            break;
        case '&':
            if (!two('&'))
                throw ExprError(ExprError::Kind::Syntax, start, "expected '&&'");
            push(Tok::AndAnd, start, 2);
            i += 2;
            break;
        case '|':
            if (!two('|'))
                throw ExprError(ExprError::Kind::Syntax, start, "expected '||'");
            push(Tok::OrOr, start, 2);
            i += 2;
            break;
        default:
            throw ExprError(ExprError::Kind::Syntax, start, std::string("unexpected character '") + c + "'");
        }
    }
    out.push_back({Tok::End, text.substr(n), n});
    return out;
}

}  // namespace treeduce::expr::detail
