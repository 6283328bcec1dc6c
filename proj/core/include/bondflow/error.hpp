#pragma once

#include <stdexcept>
#include <string>

namespace bondflow {

/// Base class for every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Position inside a source text, 1-based.
struct SourceLocation {
    int line = 1;
    int column = 1;

    friend bool operator==(const SourceLocation&, const SourceLocation&) = default;
};

std::string to_string(const SourceLocation& location);

}  // namespace bondflow
