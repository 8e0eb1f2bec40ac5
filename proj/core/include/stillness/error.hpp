#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stillness {

enum class ErrorKind {
  // protocol
  TruncatedFrame,
  InvalidHeader,
  PayloadTooLarge,
  WrongLength,
  InvalidMode,
  // fusion
  NonNormalizable,
  // synth
  LengthMismatch,
  RateMismatch,
  IoError,
  // osc
  InvalidAddress,
  UnsupportedArgType,
  MessageTooLarge,
  SocketError,
  // session
  ParseError,
  MonotonicityError,
  VersionError,
  InvalidScenario,
  // cli / hardware
  NoDongle,
  InvalidFlag,
  InvalidConfig,
  Timeout,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Single exception type for the library; `kind()` tells callers how to react.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace stillness
