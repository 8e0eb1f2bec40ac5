#include "stillness/error.hpp"

namespace stillness {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::TruncatedFrame: return "TruncatedFrame";
    case ErrorKind::InvalidHeader: return "InvalidHeader";
    case ErrorKind::PayloadTooLarge: return "PayloadTooLarge";
    case ErrorKind::WrongLength: return "WrongLength";
    case ErrorKind::InvalidMode: return "InvalidMode";
    case ErrorKind::NonNormalizable: return "NonNormalizable";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::RateMismatch: return "RateMismatch";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InvalidAddress: return "InvalidAddress";
    case ErrorKind::UnsupportedArgType: return "UnsupportedArgType";
    case ErrorKind::MessageTooLarge: return "MessageTooLarge";
    case ErrorKind::SocketError: return "SocketError";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::MonotonicityError: return "MonotonicityError";
    case ErrorKind::VersionError: return "VersionError";
    case ErrorKind::InvalidScenario: return "InvalidScenario";
    case ErrorKind::NoDongle: return "NoDongle";
    case ErrorKind::InvalidFlag: return "InvalidFlag";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::Timeout: return "Timeout";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

}  // namespace stillness
