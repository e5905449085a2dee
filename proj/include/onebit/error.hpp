#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace onebit {

enum class ErrorCode {
  // input / validation class
  DimensionMismatch,
  NotControllable,
  UnstableCompression,
  UnstableCoefficients,
  NonPositivePeriod,
  NotContinuous,
  AsymmetricGraph,
  InvalidEdge,
  EdgeNotInUnion,
  MismatchedAgentCount,
  NotConnected,
  NotJointlyConnected,
  NotStochastic,
  NotErgodic,
  NonPositiveSigma,
  NonPositiveRadius,
  MaskMismatch,
  GammaTooSmall,
  InvalidWindow,
  InsufficientHorizon,
  ParseError,
  ValidationError,
  // runtime numeric class
  IdentityViolation,
  IllConditioned,
  NonPositiveMetric,
  BoundViolation,
  NonFinite,
};

enum class ErrorClass { Validation, Numeric };

inline constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotControllable: return "NotControllable";
    case ErrorCode::UnstableCompression: return "UnstableCompression";
    case ErrorCode::UnstableCoefficients: return "UnstableCoefficients";
    case ErrorCode::NonPositivePeriod: return "NonPositivePeriod";
    case ErrorCode::NotContinuous: return "NotContinuous";
    case ErrorCode::AsymmetricGraph: return "AsymmetricGraph";
    case ErrorCode::InvalidEdge: return "InvalidEdge";
    case ErrorCode::EdgeNotInUnion: return "EdgeNotInUnion";
    case ErrorCode::MismatchedAgentCount: return "MismatchedAgentCount";
    case ErrorCode::NotConnected: return "NotConnected";
    case ErrorCode::NotJointlyConnected: return "NotJointlyConnected";
    case ErrorCode::NotStochastic: return "NotStochastic";
    case ErrorCode::NotErgodic: return "NotErgodic";
    case ErrorCode::NonPositiveSigma: return "NonPositiveSigma";
    case ErrorCode::NonPositiveRadius: return "NonPositiveRadius";
    case ErrorCode::MaskMismatch: return "MaskMismatch";
    case ErrorCode::GammaTooSmall: return "GammaTooSmall";
    case ErrorCode::InvalidWindow: return "InvalidWindow";
    case ErrorCode::InsufficientHorizon: return "InsufficientHorizon";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::IdentityViolation: return "IdentityViolation";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::NonPositiveMetric: return "NonPositiveMetric";
    case ErrorCode::BoundViolation: return "BoundViolation";
    case ErrorCode::NonFinite: return "NonFinite";
  }
  return "Unknown";
}

inline constexpr ErrorClass classify(ErrorCode code) {
  switch (code) {
    case ErrorCode::IdentityViolation:
    case ErrorCode::IllConditioned:
    case ErrorCode::NonPositiveMetric:
    case ErrorCode::BoundViolation:
    case ErrorCode::NonFinite:
      return ErrorClass::Numeric;
    default:
      return ErrorClass::Validation;
  }
}

/// Every failure raised by the library carries a code so callers (the CLI in
/// particular) can map it to an exit status without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorClass error_class() const noexcept { return classify(code_); }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace onebit
