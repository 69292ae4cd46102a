#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace retinavr {

enum class ErrorCode {
  NonFiniteInput,
  DegenerateRig,
  OriginOutsideEye,
  PointOffSurface,
  InvalidConfig,
  SeedPlacementFailure,
  NonMonotonicTimestamp,
  TaskAlreadyComplete,
  TaskNotComplete,
  CorruptLog,
  VersionMismatch,
  SeedMismatch,
  IncompleteSession,
  DuplicateSession,
  GenerationTimeout,
  EmptyInput,
  DegeneratePooledSD,
  SingularDesign,
  NonConvergence,
  ProtocolViolation,
  BindFailure,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library carries a machine-readable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace retinavr
