#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace schoolconn {

enum class ErrorKind {
  ParseError,
  DimensionMismatch,
  InvalidCoordinate,
  MissingColumn,
  LocalityViolation,
  EmptyBuffer,
  EmptyInput,
  UnknownClass,
  EmptyLayer,
  MissingEmbedding,
  UnknownColumn,
  LengthMismatch,
  DegenerateClass,
  NonFiniteLoss,
  UnsupportedFamily,
  EmptyMatrix,
  InvalidConfig,
  IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure in the library is reported through this type; the kind
// survives context annotation so callers can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Same kind, message prefixed with `context: `.
  Error annotated(std::string_view context) const {
    return Error(kind_, std::string(context) + ": " + what());
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace schoolconn
