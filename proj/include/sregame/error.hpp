#pragma once

#include <stdexcept>
#include <string>

namespace sregame {

/// Stable error numbering. The values double as C API return codes and CLI
/// exit statuses, so never renumber an existing entry.
enum class ErrorCode : int {
  Ok = 0,
  Internal = 1,
  AssumptionViolated = 2,
  ConfigError = 3,
  DimensionMismatch = 4,
  NonPositiveScale = 5,
  SingularBlock = 6,
  MinimaxGapExceeded = 7,
  ConeUnsupported = 8,
  BoundViolation = 9,
  StepRejected = 10,
  GridMismatch = 11,
  RegressionIllConditioned = 12,
  NonFinite = 13,
  SaddleViolation = 14,
  MissingSolution = 15,
  SignViolation = 16,
  ConditionRequired = 17,
  CheckFailed = 18,
  InvalidArgument = 19,
};

const char* error_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, std::string(error_name(code)) + ": " + what);
}

}  // namespace sregame
