#include "descfilter/error.hpp"

namespace descfilter {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::PreconditionViolation: return "precondition-violation";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::Syntax: return "syntax-error";
    case ErrorKind::UnknownIdentifier: return "unknown-identifier";
    case ErrorKind::ArityMismatch: return "arity-mismatch";
    case ErrorKind::Evaluation: return "evaluation-error";
    case ErrorKind::ModelValidation: return "model-validation";
    case ErrorKind::Nonaffine: return "nonaffine";
    case ErrorKind::SubstitutionApplied: return "substitution-applied";
    case ErrorKind::MissingVariable: return "missing-variable";
    case ErrorKind::CertificationUnavailable: return "certification-unavailable";
    case ErrorKind::SynthesisInfeasible: return "synthesis-infeasible";
    case ErrorKind::NoConsistentPoint: return "no-consistent-point-found";
    case ErrorKind::SimulationAborted: return "simulation-aborted";
    case ErrorKind::Parse: return "parse-error";
    case ErrorKind::Internal: return "internal-error";
    }
    return "unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

namespace {
std::string located(const std::string& file, int line, int column, const std::string& message) {
    std::string where = file.empty() ? std::string{} : file + ":";
    where += std::to_string(line) + ":" + std::to_string(column);
    return where + ": " + message;
}
} // namespace

ParseError::ParseError(ErrorKind kind, const std::string& message, int line, int column, std::string file)
    : Error(kind, located(file, line, column, message)), detail_(message), line_(line), column_(column), file_(std::move(file)) {}

} // namespace descfilter
