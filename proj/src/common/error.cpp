#include "retinavr/error.hpp"

namespace retinavr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::DegenerateRig: return "DegenerateRig";
    case ErrorCode::OriginOutsideEye: return "OriginOutsideEye";
    case ErrorCode::PointOffSurface: return "PointOffSurface";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::SeedPlacementFailure: return "SeedPlacementFailure";
    case ErrorCode::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case ErrorCode::TaskAlreadyComplete: return "TaskAlreadyComplete";
    case ErrorCode::TaskNotComplete: return "TaskNotComplete";
    case ErrorCode::CorruptLog: return "CorruptLog";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::SeedMismatch: return "SeedMismatch";
    case ErrorCode::IncompleteSession: return "IncompleteSession";
    case ErrorCode::DuplicateSession: return "DuplicateSession";
    case ErrorCode::GenerationTimeout: return "GenerationTimeout";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DegeneratePooledSD: return "DegeneratePooledSD";
    case ErrorCode::SingularDesign: return "SingularDesign";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::ProtocolViolation: return "ProtocolViolation";
    case ErrorCode::BindFailure: return "BindFailure";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace retinavr
