#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace requisites::bn {

enum class ErrorCode {
  CycleDetected,
  CptMismatch,
  RowNotNormalized,
  UnknownVariable,
  IllegalState,
  DuplicateVariable,
  DuplicateEdge,
  InvalidVariable,
  IncompleteAssignment,
  InconsistentEvidence,
  ClassObserved,
  ParseError,
};

std::string_view to_string(ErrorCode code);

// Raised by every bn operation; code() identifies the violated contract.
class BnError : public std::runtime_error {
 public:
  BnError(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace requisites::bn
