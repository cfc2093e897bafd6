#pragma once

#include <stdexcept>
#include <string>

namespace synthrel {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data: malformed corpus lines, pattern tables, judged files.
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A completion endpoint could not be reached or kept failing.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int last_status)
      : Error(what), last_status_(last_status) {}

  /// HTTP status of the last attempt, or 0 when no response arrived.
  int last_status() const noexcept { return last_status_; }

 private:
  int last_status_;
};

enum class ParseErrorKind {
  MissingLine,
  WrongCount,
  OutOfRange,
  Malformed,
};

inline const char* to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::MissingLine: return "missing_line";
    case ParseErrorKind::WrongCount: return "wrong_count";
    case ParseErrorKind::OutOfRange: return "out_of_range";
    case ParseErrorKind::Malformed: return "malformed";
  }
  return "unknown";
}

// A model response that does not follow the expected output grammar.
class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, const std::string& what)
      : Error(what), kind_(kind) {}

  ParseErrorKind kind() const noexcept { return kind_; }

 private:
  ParseErrorKind kind_;
};

// Raised when a run is stopped by an interrupt signal.
class Interrupted : public Error {
 public:
  Interrupted() : Error("interrupted") {}
};

}  // namespace synthrel
