#pragma once

#include "bondflow/error.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace bondflow {

enum class TokenKind {
    Identifier,
    Number,
    String,
    Symbol,   // + - * / ( ) [ ] { } , = . ->
    Newline,
    End,
    Invalid,
};

struct Token {
    TokenKind kind = TokenKind::End;
    std::string text;
    double number = 0.0;
    SourceLocation location;

    bool is(TokenKind k, std::string_view t) const { return kind == k && text == t; }
    bool is_symbol(std::string_view t) const { return is(TokenKind::Symbol, t); }
};

/// Splits text into tokens. Never throws: bytes that start no token become
/// `Invalid` tokens carrying a message in `text`. Newlines inside (), [] and
/// {} are dropped so attribute blocks may span lines. `#` starts a comment.
/// The result always ends with an `End` token.
std::vector<Token> tokenize(std::string_view source, SourceLocation origin = {});

}  // namespace bondflow
