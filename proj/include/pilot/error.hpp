#pragma once

#include <stdexcept>
#include <string>

namespace pilot {

enum class ErrorCode {
  AngleNearPi,
  BehindCamera,
  NonPositiveDepth,
  BadDimensions,
  OutOfBounds,
  CameraUnderground,
  NoIntersection,
  InsufficientValidPixels,
  ConfigMismatch,
  SolveFailed,
  AllHypothesesInvalid,
  UnknownFrame,
  LengthMismatch,
  ParseError,
  IoError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::AngleNearPi: return "AngleNearPi";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::BadDimensions: return "BadDimensions";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::CameraUnderground: return "CameraUnderground";
    case ErrorCode::NoIntersection: return "NoIntersection";
    case ErrorCode::InsufficientValidPixels: return "InsufficientValidPixels";
    case ErrorCode::ConfigMismatch: return "ConfigMismatch";
    case ErrorCode::SolveFailed: return "SolveFailed";
    case ErrorCode::AllHypothesesInvalid: return "AllHypothesesInvalid";
    case ErrorCode::UnknownFrame: return "UnknownFrame";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Single exception type for the library; inspect code() to branch.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pilot
