#pragma once

#include <stdexcept>
#include <string>

namespace ribkit {

// Failure categories. Each maps to one CLI exit code.
enum class ErrorKind {
  io,                // 1
  format,            // 1
  invalid_argument,  // 1
  usage,             // 2
  refusal,           // 3
  protocol,          // 4
  verification,      // 5
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  int exit_code() const noexcept {
    switch (kind_) {
      case ErrorKind::io:
      case ErrorKind::format:
      case ErrorKind::invalid_argument: return 1;
      case ErrorKind::usage: return 2;
      case ErrorKind::refusal: return 3;
      case ErrorKind::protocol: return 4;
      case ErrorKind::verification: return 5;
    }
    return 1;
  }

 private:
  ErrorKind kind_;
};

struct IoError : Error {
  explicit IoError(const std::string& w) : Error(ErrorKind::io, w) {}
};
struct FormatError : Error {
  explicit FormatError(const std::string& w) : Error(ErrorKind::format, w) {}
};
struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& w)
      : Error(ErrorKind::invalid_argument, w) {}
};
struct UsageError : Error {
  explicit UsageError(const std::string& w) : Error(ErrorKind::usage, w) {}
};
struct RefusalError : Error {
  explicit RefusalError(const std::string& w) : Error(ErrorKind::refusal, w) {}
};
struct ProtocolError : Error {
  explicit ProtocolError(const std::string& w)
      : Error(ErrorKind::protocol, w) {}
};
struct VerificationError : Error {
  explicit VerificationError(const std::string& w)
      : Error(ErrorKind::verification, w) {}
};

}  // namespace ribkit
