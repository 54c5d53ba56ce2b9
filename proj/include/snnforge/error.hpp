#pragma once

#include <stdexcept>
#include <string>

namespace snnforge {

/// Caller violated an operation's precondition (shape, width or argument range).
class UsageError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A network description is malformed or inconsistent.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data (rasters, weight files, datasets) is malformed or mismatched.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A file could not be parsed. Carries the 1-based line number when known.
class ParseError : public DataError {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : DataError(line == 0 ? what : what + " (line " + std::to_string(line) + ")"), message_(what), line_(line) {}

    std::size_t line() const noexcept { return line_; }
    /// Same error with a context prefix such as the file name.
    ParseError prefixed(const std::string& prefix) const { return ParseError(prefix + message_, line_); }

private:
    std::string message_;
    std::size_t line_;
};

/// HDL emission failed (unsupported width, inconsistent bundle).
class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace snnforge
