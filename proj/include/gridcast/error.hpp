#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gridcast {

enum class ErrorCode {
  InvalidTimestamp,
  EmptyInput,
  NoData,
  NoTerminalValue,
  InsufficientHistory,
  ConfigError,
  NoEvaluablePoints,
  Io,
  Format,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidTimestamp: return "InvalidTimestamp";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NoData: return "NoData";
    case ErrorCode::NoTerminalValue: return "NoTerminalValue";
    case ErrorCode::InsufficientHistory: return "InsufficientHistory";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::NoEvaluablePoints: return "NoEvaluablePoints";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
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

}  // namespace gridcast
