#include "bondflow/lexer.hpp"

#include <cctype>
#include <charconv>

namespace bondflow {

std::string to_string(const SourceLocation& location) {
    return std::to_string(location.line) + ":" + std::to_string(location.column);
}

namespace {

bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}
bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

class Lexer {
public:
    Lexer(std::string_view src, SourceLocation origin) : src_(src), loc_(origin) {}

    std::vector<Token> run() {
        std::vector<Token> out;
        int depth = 0;
        bool glued = false;  // previous token ends right before the cursor
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c == '\n') {
                if (depth == 0) out.push_back(make(TokenKind::Newline, "\n", loc_));
                advance();
                glued = false;
                continue;
            }
            if (c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v') {
                advance();
                glued = false;
                continue;
            }
            if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n') advance();
                glued = false;
                continue;
            }
            const SourceLocation start = loc_;
            const bool after_ident = glued && !out.empty() && out.back().kind == TokenKind::Identifier;
            if (is_ident_start(c)) {
                const std::size_t b = pos_;
                while (pos_ < src_.size() && is_ident_char(src_[pos_])) advance();
                out.push_back(make(TokenKind::Identifier, std::string(src_.substr(b, pos_ - b)), start));
            } else if (is_digit(c) || (c == '.' && !after_ident && pos_ + 1 < src_.size() &&
                                       is_digit(src_[pos_ + 1]))) {
                out.push_back(number(start));
            } else if (c == '"') {
                out.push_back(string_literal(start));
            } else if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
                advance();
                advance();
                out.push_back(make(TokenKind::Symbol, "->", start));
            } else if (std::string_view("+-*/()[]{},=.").find(c) != std::string_view::npos) {
                if (c == '(' || c == '[' || c == '{') ++depth;
                if ((c == ')' || c == ']' || c == '}') && depth > 0) --depth;
                advance();
                out.push_back(make(TokenKind::Symbol, std::string(1, c), start));
            } else {
                const unsigned char byte = static_cast<unsigned char>(c);
                advance();
                std::string msg = "unexpected character";
                if (std::isprint(byte)) {
                    msg += " '" + std::string(1, c) + "'";
                } else {
                    msg += " (byte " + std::to_string(byte) + ")";
                }
                out.push_back(make(TokenKind::Invalid, msg, start));
            }
            glued = true;
        }
        out.push_back(make(TokenKind::End, "", loc_));
        return out;
    }

private:
    void advance() {
        if (src_[pos_] == '\n') {
            ++loc_.line;
            loc_.column = 1;
        } else {
            ++loc_.column;
        }
        ++pos_;
    }

    static Token make(TokenKind kind, std::string text, SourceLocation loc) {
        Token t;
        t.kind = kind;
        t.text = std::move(text);
        t.location = loc;
        return t;
    }

    Token number(SourceLocation start) {
        const std::size_t b = pos_;
        while (pos_ < src_.size() && is_digit(src_[pos_])) advance();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            advance();
            while (pos_ < src_.size() && is_digit(src_[pos_])) advance();
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t look = pos_ + 1;
            if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
            if (look < src_.size() && is_digit(src_[look])) {
                while (pos_ < look) advance();
                while (pos_ < src_.size() && is_digit(src_[pos_])) advance();
            }
        }
        const std::string_view text = src_.substr(b, pos_ - b);
        Token t = make(TokenKind::Number, std::string(text), start);
        const auto res = std::from_chars(text.data(), text.data() + text.size(), t.number);
        if (res.ec == std::errc::result_out_of_range) {
            t.kind = TokenKind::Invalid;
            t.text = "number out of range '" + std::string(text) + "'";
        } else if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
            t.kind = TokenKind::Invalid;
            t.text = "malformed number '" + std::string(text) + "'";
        }
        return t;
    }

    Token string_literal(SourceLocation start) {
        advance();  // opening quote
        std::string value;
        while (pos_ < src_.size() && src_[pos_] != '"' && src_[pos_] != '\n') {
            if (src_[pos_] == '\\' && pos_ + 1 < src_.size() &&
                (src_[pos_ + 1] == '"' || src_[pos_ + 1] == '\\')) {
                advance();
            }
            value.push_back(src_[pos_]);
            advance();
        }
        if (pos_ >= src_.size() || src_[pos_] != '"') {
            return make(TokenKind::Invalid, "unterminated string", start);
        }
        advance();
        return make(TokenKind::String, std::move(value), start);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    SourceLocation loc_;
};

}  // namespace

std::vector<Token> tokenize(std::string_view source, SourceLocation origin) {
    return Lexer(source, origin).run();
}

}  // namespace bondflow
