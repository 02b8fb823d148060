#pragma once

#include <stdexcept>
#include <string>

namespace doa {

enum class ErrorCode {
  InvalidArgument,
  OutOfRange,
  DegenerateGeometry,
  SignalTooShort,
  DegenerateSignal,
  TooManyPairs,
  TooFewPairs,
  DegenerateSystem,
  AllDegenerate,
  InsufficientData,
  MalformedWav,
  ChannelMismatch,
  MalformedInput,
  FileNotFound,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::SignalTooShort: return "SignalTooShort";
    case ErrorCode::DegenerateSignal: return "DegenerateSignal";
    case ErrorCode::TooManyPairs: return "TooManyPairs";
    case ErrorCode::TooFewPairs: return "TooFewPairs";
    case ErrorCode::DegenerateSystem: return "DegenerateSystem";
    case ErrorCode::AllDegenerate: return "AllDegenerate";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::MalformedWav: return "MalformedWav";
    case ErrorCode::ChannelMismatch: return "ChannelMismatch";
    case ErrorCode::MalformedInput: return "MalformedInput";
    case ErrorCode::FileNotFound: return "FileNotFound";
  }
  return "Unknown";
}

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace doa
