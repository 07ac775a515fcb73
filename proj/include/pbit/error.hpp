#pragma once

#include <stdexcept>
#include <string>

namespace pbit {

// Failure classes. The CLI maps each one to its own exit code.

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ResourceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based offending line (0 if not line-oriented).
struct ParseError : IoError {
    ParseError(const std::string& what, std::size_t line_no)
        : IoError(line_no ? what + " (line " + std::to_string(line_no) + ")" : what), line(line_no) {}
    std::size_t line;
};

}  // namespace pbit
