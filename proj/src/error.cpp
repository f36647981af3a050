#include "sregame/error.hpp"

namespace sregame {

const char* error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Ok: return "Ok";
    case ErrorCode::Internal: return "Internal";
    case ErrorCode::AssumptionViolated: return "AssumptionViolated";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonPositiveScale: return "NonPositiveScale";
    case ErrorCode::SingularBlock: return "SingularBlock";
    case ErrorCode::MinimaxGapExceeded: return "MinimaxGapExceeded";
    case ErrorCode::ConeUnsupported: return "ConeUnsupported";
    case ErrorCode::BoundViolation: return "BoundViolation";
    case ErrorCode::StepRejected: return "StepRejected";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::RegressionIllConditioned: return "RegressionIllConditioned";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::SaddleViolation: return "SaddleViolation";
    case ErrorCode::MissingSolution: return "MissingSolution";
    case ErrorCode::SignViolation: return "SignViolation";
    case ErrorCode::ConditionRequired: return "ConditionRequired";
    case ErrorCode::CheckFailed: return "CheckFailed";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace sregame
