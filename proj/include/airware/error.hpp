#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace airware {

enum class ErrorCode {
  InvalidArgument,
  NyquistViolation,
  GridViolation,
  DomainError,
  SimulationStall,
  TooShort,
  BandOutOfRange,
  ShapeMismatch,
  DivergenceError,
  NoSuccessfulTrial,
  EmptyMatrix,
  TooFewUsers,
  InsufficientSamples,
  Leakage,
  Io,
  Format,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NyquistViolation: return "NyquistViolation";
    case ErrorCode::GridViolation: return "GridViolation";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::SimulationStall: return "SimulationStall";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::BandOutOfRange: return "BandOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DivergenceError: return "DivergenceError";
    case ErrorCode::NoSuccessfulTrial: return "NoSuccessfulTrial";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::TooFewUsers: return "TooFewUsers";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::Leakage: return "Leakage";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable code; the
/// message always starts with the code name so CLI output can be grepped.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& detail) { throw Error(code, detail); }

inline void require(bool condition, ErrorCode code, const std::string& detail) {
  if (!condition) fail(code, detail);
}

}  // namespace airware
