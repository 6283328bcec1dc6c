#pragma once

// Modulation expressions: the small arithmetic language used for non-constant
// element parameters and time-function signals.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('-' | '+') unary | primary
//   primary := number | name | func '(' expr (',' expr)* ')' | '(' expr ')'
//   func    := sin | cos | exp | sqrt | abs | min | max | pow
//
// Parsed text is compiled to a postfix program; evaluation is a stack machine
// over the values of the referenced names.

#include "bondflow/error.hpp"
#include "bondflow/lexer.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bondflow {

class ExprSyntaxError : public Error {
public:
    ExprSyntaxError(const std::string& message, SourceLocation location);
    SourceLocation location() const { return location_; }
    const std::string& detail() const { return detail_; }

private:
    SourceLocation location_;
    std::string detail_;
};

/// Division by zero or square root of a negative number.
class ExprEvalError : public Error {
public:
    ExprEvalError(const std::string& message, SourceLocation location);
    SourceLocation location() const { return location_; }

private:
    SourceLocation location_;
};

class Expr {
public:
    /// The literal 0.
    Expr();

    static Expr literal(double value);

    /// Parses a complete expression; trailing tokens are an error.
    static Expr parse(std::string_view text, SourceLocation origin = {});

    /// Parses one expression starting at `pos` and leaves `pos` on the first
    /// token that does not belong to it.
    static Expr parse(std::span<const Token> tokens, std::size_t& pos);

    /// Referenced names (including `t`), in order of first appearance.
    const std::vector<std::string>& names() const { return names_; }

    /// Value when the expression references no names at all.
    std::optional<double> constant_value() const;

    /// Evaluates with `values[i]` bound to `names()[i]`.
    double evaluate(std::span<const double> values) const;

    /// Canonical single-line rendering; re-parses to the same token sequence.
    std::string text() const;

    const std::vector<std::string>& tokens() const { return tokens_; }

    SourceLocation location() const { return location_; }

    /// Token-for-token equality.
    friend bool operator==(const Expr& a, const Expr& b) { return a.tokens_ == b.tokens_; }

private:
    enum class OpCode : std::uint8_t {
        Constant, Load, Add, Sub, Mul, Div, Neg,
        Sin, Cos, Exp, Sqrt, Abs, Min, Max, Pow,
    };
    struct Op {
        OpCode code;
        double value = 0.0;
        std::uint32_t index = 0;
        SourceLocation location;
    };

    friend class ExprParser;

    struct Empty {};
    explicit Expr(Empty) {}

    std::vector<Op> program_;
    std::vector<std::string> names_;
    std::vector<std::string> tokens_;
    std::vector<bool> unary_;  // parallel to tokens_: sign token is a prefix operator
    int max_stack_ = 1;
    SourceLocation location_;
};

/// Shortest decimal text that reads back to exactly `value`.
std::string format_number(double value);

}  // namespace bondflow
