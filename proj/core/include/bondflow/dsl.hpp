#pragma once

// Text format for bond graphs.
//
//   model <name>
//   param <name> = <expr>
//   signal <name> = effort(<bond>) | flow(<bond>)
//                 | momentum(<elem>[.port]) | displacement(<elem>[.port]) | <expr>
//   element <kind> <id> [{ key = value, ... }]
//       keys: k | value, init, causality, out = [..], unit = "..", label = ".."
//       matrices are row-major: k = [[a, b], [c, d]]; vectors: [a, b]
//   bond <id> <tail>[.port] -> <head>[.port] [dim <n>] [causal head|tail] [{ label = ".." }]
//   probe <bond-or-element>[.port] <quantity>
//
// `#` starts a comment; newlines inside brackets are ignored.

#include "bondflow/causality.hpp"
#include "bondflow/graph.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bondflow {

struct ParseError {
    std::string message;
    SourceLocation location;

    std::string text() const { return to_string(location) + ": " + message; }
};

struct ParseResult {
    std::optional<BondGraph> graph;      // absent when syntax errors occurred
    std::vector<ParseError> errors;      // lexical / syntax errors
    std::vector<Diagnostic> diagnostics; // validation of the parsed graph

    bool ok() const { return graph && errors.empty() && !has_errors(diagnostics); }
};

/// Never throws.
ParseResult parse(std::string_view text);

/// Parses and validates; throws Error listing every problem.
BondGraph load(std::string_view text);
BondGraph load_file(const std::string& path);

/// Canonical text; parse(emit(g)) is equivalent to g.
std::string emit(const BondGraph& graph);

/// DOT rendering; edge labels carry `|H` / `|T` stroke markers when an
/// assignment is given.
std::string emit_dot(const BondGraph& graph, const CausalAssignment* assignment = nullptr);

/// Structural equality independent of declaration order. On mismatch,
/// `difference` (if given) receives a description.
bool equivalent(const BondGraph& a, const BondGraph& b, std::string* difference = nullptr);

}  // namespace bondflow
