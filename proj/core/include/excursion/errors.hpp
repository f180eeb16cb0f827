#pragma once

#include <stdexcept>
#include <string>

namespace excursion {

/// Broad failure class; the CLI maps it onto exit codes.
enum class ErrorKind { validation, numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Input and usage errors.
struct ValidationError : Error {
  explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};
struct RangeError : ValidationError {
  using ValidationError::ValidationError;
};
struct UsageError : ValidationError {
  using ValidationError::ValidationError;
};
struct ParseError : ValidationError {
  using ValidationError::ValidationError;
};
struct ProbabilitySumError : ValidationError {
  using ValidationError::ValidationError;
};
struct IncompleteTableError : ValidationError {
  using ValidationError::ValidationError;
};

// Numerical, identification and estimation failures.
struct NumericalError : Error {
  explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};
struct UndefinedBlipError : NumericalError {
  using NumericalError::NumericalError;
};
struct IdentificationError : NumericalError {
  using NumericalError::NumericalError;
};
struct PositivityError : NumericalError {
  using NumericalError::NumericalError;
};
struct SeparationError : NumericalError {
  using NumericalError::NumericalError;
};
struct RankDeficiencyError : NumericalError {
  using NumericalError::NumericalError;
};
struct ConvergenceError : NumericalError {
  using NumericalError::NumericalError;
};
struct NoDataError : NumericalError {
  using NumericalError::NumericalError;
};
struct EnumerationLimitError : NumericalError {
  using NumericalError::NumericalError;
};
struct NotEnumerableError : NumericalError {
  using NumericalError::NumericalError;
};

}  // namespace excursion
