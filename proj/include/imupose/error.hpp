#pragma once

#include <stdexcept>
#include <string>

namespace imupose {

/// Error classes surfaced by the library. The numeric values double as the
/// CLI process exit codes, so they must stay stable.
enum class ErrorCode : int {
  kInvalidArgument = 2,
  kIo = 3,
  kBadHeader = 4,
  kNonMonotoneTimestamps = 5,
  kUnitMismatch = 6,
  kTooFewSamples = 7,
  kNotStationary = 8,
  kDegenerateGravity = 9,
  kWindowNotFull = 10,
  kNonMonotoneTime = 11,
  kExcessiveDt = 12,
  kSingularInnovation = 13,
  kMissingAttitude = 14,
  kInvalidSpec = 15,
  kMisalignedSpecs = 16,
  kNoOverlap = 17,
  kAlignmentNotStatic = 18,
  kInvalidConfig = 19,
  kCalibrationUnderexcited = 20,
  kOptimizerStalled = 21,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kBadHeader: return "BadHeader";
    case ErrorCode::kNonMonotoneTimestamps: return "NonMonotoneTimestamps";
    case ErrorCode::kUnitMismatch: return "UnitMismatch";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kNotStationary: return "NotStationary";
    case ErrorCode::kDegenerateGravity: return "DegenerateGravity";
    case ErrorCode::kWindowNotFull: return "WindowNotFull";
    case ErrorCode::kNonMonotoneTime: return "NonMonotoneTime";
    case ErrorCode::kExcessiveDt: return "ExcessiveDt";
    case ErrorCode::kSingularInnovation: return "SingularInnovation";
    case ErrorCode::kMissingAttitude: return "MissingAttitude";
    case ErrorCode::kInvalidSpec: return "InvalidSpec";
    case ErrorCode::kMisalignedSpecs: return "MisalignedSpecs";
    case ErrorCode::kNoOverlap: return "NoOverlap";
    case ErrorCode::kAlignmentNotStatic: return "AlignmentNotStatic";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kCalibrationUnderexcited: return "CalibrationUnderexcited";
    case ErrorCode::kOptimizerStalled: return "OptimizerStalled";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace imupose
