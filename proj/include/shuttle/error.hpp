#pragma once

#include <stdexcept>
#include <string>

namespace shuttle {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Inconsistent or incomplete configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Carries the offending line (1-based, 0 if unknown).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class UnsupportedVersionError : public ParseError {
public:
    using ParseError::ParseError;
};

/// The phasor sum vanished, so the dot position is undefined.
class DegeneratePhasorError : public Error {
public:
    using Error::Error;
};

/// |Delta| too small to define the local valley axis.
class ValleyDegeneracyError : public Error {
public:
    using Error::Error;
};

class IntegrationError : public Error {
public:
    using Error::Error;
};

class OracleAmbiguityError : public Error {
public:
    using Error::Error;
};

} // namespace shuttle
