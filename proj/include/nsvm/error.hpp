#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace nsvm {

enum class ErrorKind {
  NotPositiveDefinite,
  DimensionMismatch,
  NoConvergence,
  EmptyBlockList,
  ParseError,
  TooFewClasses,
  BadFoldCount,
  BadParams,
  BadLabel,
  EmptyClass,
  BadConfig,
  NumericalFailure,
  LengthMismatch,
  TooFewFolds,
  IoError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::EmptyBlockList: return "EmptyBlockList";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::TooFewClasses: return "TooFewClasses";
    case ErrorKind::BadFoldCount: return "BadFoldCount";
    case ErrorKind::BadParams: return "BadParams";
    case ErrorKind::BadLabel: return "BadLabel";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::BadConfig: return "BadConfig";
    case ErrorKind::NumericalFailure: return "NumericalFailure";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::TooFewFolds: return "TooFewFolds";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Numerical kinds map to CLI exit code 3, everything else to 2.
inline bool is_numerical(ErrorKind kind) {
  return kind == ErrorKind::NotPositiveDefinite || kind == ErrorKind::NoConvergence ||
         kind == ErrorKind::NumericalFailure;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), message_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The description without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

}  // namespace nsvm
