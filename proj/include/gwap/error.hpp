#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace gwap {

enum class ErrorCode {
  ConfigInvalid,
  DomainError,
  UnknownLabel,
  UnknownTask,
  PlayerExhausted,
  PoolEmpty,
  AnswerSetMismatch,
  RepeatedContribution,
  MissingControls,
  EmptyTask,
  NoContributions,
  BadParameters,
  DivisionByZero,
  KeyMismatch,
  UnknownAlgorithm,
  ParseError,
  OutOfOrderRounds,
  IoError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::UnknownTask: return "UnknownTask";
    case ErrorCode::PlayerExhausted: return "PlayerExhausted";
    case ErrorCode::PoolEmpty: return "PoolEmpty";
    case ErrorCode::AnswerSetMismatch: return "AnswerSetMismatch";
    case ErrorCode::RepeatedContribution: return "RepeatedContribution";
    case ErrorCode::MissingControls: return "MissingControls";
    case ErrorCode::EmptyTask: return "EmptyTask";
    case ErrorCode::NoContributions: return "NoContributions";
    case ErrorCode::BadParameters: return "BadParameters";
    case ErrorCode::DivisionByZero: return "DivisionByZero";
    case ErrorCode::KeyMismatch: return "KeyMismatch";
    case ErrorCode::UnknownAlgorithm: return "UnknownAlgorithm";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::OutOfOrderRounds: return "OutOfOrderRounds";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

// All library failures are reported through this exception. `details` holds
// one entry per violated constraint where several can be reported at once.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message,
        std::vector<std::string> details = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        details_(std::move(details)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::vector<std::string>& details() const noexcept { return details_; }

 private:
  ErrorCode code_;
  std::vector<std::string> details_;
};

}  // namespace gwap
