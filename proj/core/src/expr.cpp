#include "bondflow/expr.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>

namespace bondflow {

ExprSyntaxError::ExprSyntaxError(const std::string& message, SourceLocation location)
    : Error(to_string(location) + ": " + message), location_(location), detail_(message) {}

ExprEvalError::ExprEvalError(const std::string& message, SourceLocation location)
    : Error(to_string(location) + ": " + message), location_(location) {}

std::string format_number(double value) {
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), res.ptr);
}

namespace {

constexpr int kMaxDepth = 200;

struct FunctionInfo {
    int arity;
    int code;
};

const std::map<std::string, FunctionInfo, std::less<>>& functions() {
    // codes index into the OpCode range starting at Sin
    static const std::map<std::string, FunctionInfo, std::less<>> table = {
        {"sin", {1, 0}}, {"cos", {1, 1}}, {"exp", {1, 2}}, {"sqrt", {1, 3}},
        {"abs", {1, 4}}, {"min", {2, 5}}, {"max", {2, 6}}, {"pow", {2, 7}},
    };
    return table;
}

}  // namespace

class ExprParser {
public:
    ExprParser(std::span<const Token> tokens, std::size_t& pos, Expr& out)
        : tokens_(tokens), pos_(pos), out_(out) {}

    void run() {
        out_.location_ = peek().location;
        expression(0);
        // stack depth of a postfix program
        int depth = 0;
        int peak = 1;
        for (const auto& op : out_.program_) {
            switch (op.code) {
                case Expr::OpCode::Constant:
                case Expr::OpCode::Load: ++depth; break;
                case Expr::OpCode::Add: case Expr::OpCode::Sub: case Expr::OpCode::Mul:
                case Expr::OpCode::Div: case Expr::OpCode::Min: case Expr::OpCode::Max:
                case Expr::OpCode::Pow: --depth; break;
                default: break;
            }
            peak = std::max(peak, depth);
        }
        out_.max_stack_ = peak;
    }

private:
    const Token& peek() const { return tokens_[std::min(pos_, tokens_.size() - 1)]; }

    const Token& take() {
        const Token& t = peek();
        if (pos_ < tokens_.size() - 1) ++pos_;
        return t;
    }

    [[noreturn]] void fail(const std::string& msg, const Token& at) const {
        if (at.kind == TokenKind::Invalid) throw ExprSyntaxError(at.text, at.location);
        std::string found = at.kind == TokenKind::End       ? "end of input"
                            : at.kind == TokenKind::Newline ? "end of line"
                                                            : "'" + at.text + "'";
        throw ExprSyntaxError(msg + ", found " + found, at.location);
    }

    void emit_token(const std::string& text, bool unary = false) {
        out_.tokens_.push_back(text);
        out_.unary_.push_back(unary);
    }

    void emit(Expr::OpCode code, SourceLocation loc, double value = 0.0, std::uint32_t index = 0) {
        out_.program_.push_back({code, value, index, loc});
    }

    void expression(int depth) {
        if (depth > kMaxDepth) fail("expression nested too deeply", peek());
        term(depth + 1);
        while (peek().is_symbol("+") || peek().is_symbol("-")) {
            const Token& op = take();
            emit_token(op.text);
            term(depth + 1);
            emit(op.text == "+" ? Expr::OpCode::Add : Expr::OpCode::Sub, op.location);
        }
    }

    void term(int depth) {
        unary(depth + 1);
        while (peek().is_symbol("*") || peek().is_symbol("/")) {
            const Token& op = take();
            emit_token(op.text);
            unary(depth + 1);
            emit(op.text == "*" ? Expr::OpCode::Mul : Expr::OpCode::Div, op.location);
        }
    }

    void unary(int depth) {
        if (depth > kMaxDepth) fail("expression nested too deeply", peek());
        if (peek().is_symbol("-") || peek().is_symbol("+")) {
            const Token& op = take();
            emit_token(op.text, true);
            unary(depth + 1);
            if (op.text == "-") emit(Expr::OpCode::Neg, op.location);
            return;
        }
        primary(depth + 1);
    }

    void primary(int depth) {
        const Token& tok = peek();
        if (tok.kind == TokenKind::Number) {
            take();
            emit_token(tok.text);
            emit(Expr::OpCode::Constant, tok.location, tok.number);
            return;
        }
        if (tok.kind == TokenKind::Identifier) {
            take();
            if (peek().is_symbol("(")) {
                call(tok, depth);
                return;
            }
            emit_token(tok.text);
            emit(Expr::OpCode::Load, tok.location, 0.0, name_index(tok.text));
            return;
        }
        if (tok.is_symbol("(")) {
            take();
            emit_token("(");
            expression(depth + 1);
            if (!peek().is_symbol(")")) fail("expected ')'", peek());
            take();
            emit_token(")");
            return;
        }
        fail("expected a number, name or '('", tok);
    }

    void call(const Token& name, int depth) {
        const auto it = functions().find(name.text);
        if (it == functions().end()) {
            throw ExprSyntaxError("unknown function '" + name.text + "'", name.location);
        }
        emit_token(name.text);
        take();  // '('
        emit_token("(");
        int args = 0;
        for (;;) {
            expression(depth + 1);
            ++args;
            if (peek().is_symbol(",")) {
                take();
                emit_token(",");
                continue;
            }
            break;
        }
        if (!peek().is_symbol(")")) fail("expected ')' after arguments", peek());
        take();
        emit_token(")");
        if (args != it->second.arity) {
            throw ExprSyntaxError("function '" + name.text + "' takes " +
                                      std::to_string(it->second.arity) + " argument(s), got " +
                                      std::to_string(args),
                                  name.location);
        }
        const auto code = static_cast<Expr::OpCode>(static_cast<int>(Expr::OpCode::Sin) + it->second.code);
        emit(code, name.location);
    }

    std::uint32_t name_index(const std::string& name) {
        for (std::size_t i = 0; i < out_.names_.size(); ++i) {
            if (out_.names_[i] == name) return static_cast<std::uint32_t>(i);
        }
        out_.names_.push_back(name);
        return static_cast<std::uint32_t>(out_.names_.size() - 1);
    }

    std::span<const Token> tokens_;
    std::size_t& pos_;
    Expr& out_;
};

Expr::Expr() : tokens_{"0"}, unary_{false} { program_.push_back({OpCode::Constant, 0.0, 0, {}}); }

Expr Expr::literal(double value) {
    Expr e{Empty{}};
    const double magnitude = std::fabs(value);
    if (std::signbit(value) && value != 0.0) {
        e.tokens_.push_back("-");
        e.unary_.push_back(true);
    }
    e.tokens_.push_back(format_number(magnitude));
    e.unary_.push_back(false);
    e.program_.push_back({OpCode::Constant, magnitude, 0, {}});
    if (std::signbit(value) && value != 0.0) e.program_.push_back({OpCode::Neg, 0.0, 0, {}});
    e.max_stack_ = 1;
    return e;
}

Expr Expr::parse(std::string_view text, SourceLocation origin) {
    const auto tokens = tokenize(text, origin);
    std::size_t pos = 0;
    Expr e = parse(tokens, pos);
    const Token& rest = tokens[pos];
    if (rest.kind != TokenKind::End) {
        if (rest.kind == TokenKind::Invalid) throw ExprSyntaxError(rest.text, rest.location);
        throw ExprSyntaxError("unexpected '" + rest.text + "' after expression", rest.location);
    }
    return e;
}

Expr Expr::parse(std::span<const Token> tokens, std::size_t& pos) {
    Expr e{Empty{}};
    if (tokens.empty()) throw ExprSyntaxError("empty expression", {});
    ExprParser(tokens, pos, e).run();
    return e;
}

std::optional<double> Expr::constant_value() const {
    if (!names_.empty()) return std::nullopt;
    return evaluate({});
}

double Expr::evaluate(std::span<const double> values) const {
    constexpr std::size_t kInline = 32;
    std::array<double, kInline> small{};
    std::vector<double> large;
    double* stack = small.data();
    if (static_cast<std::size_t>(max_stack_) > kInline) {
        large.resize(static_cast<std::size_t>(max_stack_));
        stack = large.data();
    }
    std::size_t top = 0;
    for (const Op& op : program_) {
        switch (op.code) {
            case OpCode::Constant: stack[top++] = op.value; break;
            case OpCode::Load: stack[top++] = values[op.index]; break;
            case OpCode::Add: --top; stack[top - 1] += stack[top]; break;
            case OpCode::Sub: --top; stack[top - 1] -= stack[top]; break;
            case OpCode::Mul: --top; stack[top - 1] *= stack[top]; break;
            case OpCode::Div:
                --top;
                if (stack[top] == 0.0) throw ExprEvalError("division by zero", op.location);
                stack[top - 1] /= stack[top];
                break;
            case OpCode::Neg: stack[top - 1] = -stack[top - 1]; break;
            case OpCode::Sin: stack[top - 1] = std::sin(stack[top - 1]); break;
            case OpCode::Cos: stack[top - 1] = std::cos(stack[top - 1]); break;
            case OpCode::Exp: stack[top - 1] = std::exp(stack[top - 1]); break;
            case OpCode::Sqrt:
                if (stack[top - 1] < 0.0) throw ExprEvalError("square root of a negative number", op.location);
                stack[top - 1] = std::sqrt(stack[top - 1]);
                break;
            case OpCode::Abs: stack[top - 1] = std::fabs(stack[top - 1]); break;
            case OpCode::Min: --top; stack[top - 1] = std::min(stack[top - 1], stack[top]); break;
            case OpCode::Max: --top; stack[top - 1] = std::max(stack[top - 1], stack[top]); break;
            case OpCode::Pow: --top; stack[top - 1] = std::pow(stack[top - 1], stack[top]); break;
        }
    }
    return stack[0];
}

std::string Expr::text() const {
    std::string out;
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        const std::string& tok = tokens_[i];
        if (i > 0) {
            const std::string& prev = tokens_[i - 1];
            const bool prev_opens = prev == "(" || (unary_[i - 1] && (prev == "-" || prev == "+"));
            const bool closes = tok == ")" || tok == ",";
            const bool call_paren = tok == "(" && !prev.empty() &&
                                    (std::isalpha(static_cast<unsigned char>(prev[0])) || prev[0] == '_');
            if (!prev_opens && !closes && !call_paren) out.push_back(' ');
        }
        out += tok;
    }
    return out;
}

}  // namespace bondflow
