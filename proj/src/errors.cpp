#include "rtinv/errors.hpp"

namespace rtinv {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidGrid: return "InvalidGrid";
    case ErrorCode::DegenerateStencil: return "DegenerateStencil";
    case ErrorCode::InsufficientSupport: return "InsufficientSupport";
    case ErrorCode::UnsupportedSupport: return "UnsupportedSupport";
    case ErrorCode::InsufficientNodes: return "InsufficientNodes";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnknownSymbol: return "UnknownSymbol";
    case ErrorCode::EvalDomainError: return "EvalDomainError";
    case ErrorCode::SingularLeadingCoefficient: return "SingularLeadingCoefficient";
    case ErrorCode::ConstraintOutOfRange: return "ConstraintOutOfRange";
    case ErrorCode::DependentConstraints: return "DependentConstraints";
    case ErrorCode::InconsistentConstraints: return "InconsistentConstraints";
    case ErrorCode::Underconstrained: return "Underconstrained";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidMeasurement: return "InvalidMeasurement";
    case ErrorCode::StaleOperator: return "StaleOperator";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::StiffnessFailure: return "StiffnessFailure";
    case ErrorCode::InvalidIdentifier: return "InvalidIdentifier";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace rtinv
