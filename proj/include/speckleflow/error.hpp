#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace speckleflow {

enum class ErrorKind {
  ConstantField,
  DomainError,
  ShapeMismatch,
  GridTooSmall,
  FitError,
  NotConverged,
  NotSPD,
  SingularSystem,
  DivisionByZero,
  SpecError,
  FormatError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/// Library-wide exception. The kind is the machine-checkable part; the
/// message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised by iterative solvers; carries the last relative residual.
class NotConvergedError : public Error {
 public:
  NotConvergedError(const std::string& message, double residual, int iterations);

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// Raised by the binary readers; carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& message, std::size_t offset);

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace speckleflow
