#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qrk {

enum class ErrorKind {
  ZeroRow,
  NoConvergence,
  DimensionMismatch,
  EmptyQuantile,
  BadDimensions,
  BetaOutOfRange,
  ParseError,
  InvariantViolation,
  AllZeroResiduals,
  TooManySubsets,
  BadSubsetSize,
  ParameterDomain,
  MassOutOfRange,
  CertificateUnavailable,
  Io,
  Usage,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries one of the kinds above so that
/// callers (and the CLI exit-code mapping) can branch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), message_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// The text without the kind prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorKind kind_;
  std::string message_;
};

}  // namespace qrk
