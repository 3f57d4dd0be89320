#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace rtinv {

enum class ErrorCode {
  InvalidArgument,
  InvalidGrid,
  DegenerateStencil,
  InsufficientSupport,
  UnsupportedSupport,
  InsufficientNodes,
  ParseError,
  UnknownSymbol,
  EvalDomainError,
  SingularLeadingCoefficient,
  ConstraintOutOfRange,
  DependentConstraints,
  InconsistentConstraints,
  Underconstrained,
  DimensionMismatch,
  InvalidMeasurement,
  StaleOperator,
  DegenerateSample,
  StiffnessFailure,
  InvalidIdentifier,
  SchemaError,
  IoError,
};

const char* to_string(ErrorCode code) noexcept;

/// Library-wide exception. `index()` carries a node index, byte offset or
/// constraint position when the failure is tied to one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what,
        std::optional<std::size_t> index = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        index_(index) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<std::size_t> index() const noexcept { return index_; }

 private:
  ErrorCode code_;
  std::optional<std::size_t> index_;
};

}  // namespace rtinv
