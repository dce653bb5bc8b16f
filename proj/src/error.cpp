#include "cyclematch/error.hpp"

namespace cyclematch {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Format: return "FormatError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroDegreeNode: return "ZeroDegreeNode";
    case ErrorCode::DegenerateBaseline: return "DegenerateBaseline";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::SinkhornNoConverge: return "SinkhornNoConverge";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::Spec: return "SpecError";
    case ErrorCode::Io: return "IoError";
  }
  return "Unknown";
}

}  // namespace cyclematch
