#include "speckleflow/error.hpp"

namespace speckleflow {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConstantField: return "ConstantField";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::GridTooSmall: return "GridTooSmall";
    case ErrorKind::FitError: return "FitError";
    case ErrorKind::NotConverged: return "NotConverged";
    case ErrorKind::NotSPD: return "NotSPD";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::DivisionByZero: return "DivisionByZero";
    case ErrorKind::SpecError: return "SpecError";
    case ErrorKind::FormatError: return "FormatError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

NotConvergedError::NotConvergedError(const std::string& message, double residual, int iterations)
    : Error(ErrorKind::NotConverged,
            message + " (residual " + std::to_string(residual) + " after " +
                std::to_string(iterations) + " iterations)"),
      residual_(residual),
      iterations_(iterations) {}

FormatError::FormatError(const std::string& message, std::size_t offset)
    : Error(ErrorKind::FormatError, message + " at byte offset " + std::to_string(offset)),
      offset_(offset) {}

}  // namespace speckleflow
