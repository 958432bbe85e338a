#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace descfilter {

enum class ErrorKind {
    InvalidInput,
    PreconditionViolation,
    DimensionMismatch,
    Syntax,
    UnknownIdentifier,
    ArityMismatch,
    Evaluation,
    ModelValidation,
    Nonaffine,
    SubstitutionApplied,
    MissingVariable,
    CertificationUnavailable,
    SynthesisInfeasible,
    NoConsistentPoint,
    SimulationAborted,
    Parse,
    Internal,
};

std::string_view to_string(ErrorKind kind);

// Base exception for everything the library throws on purpose.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// Syntax errors in expressions and config files carry a source position.
class ParseError : public Error {
public:
    ParseError(ErrorKind kind, const std::string& message, int line, int column, std::string file = {});

    [[nodiscard]] int line() const noexcept { return line_; }
    [[nodiscard]] int column() const noexcept { return column_; }
    [[nodiscard]] const std::string& file() const noexcept { return file_; }
    // The message without the location prefix.
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

private:
    std::string detail_;
    int line_;
    int column_;
    std::string file_;
};

} // namespace descfilter
