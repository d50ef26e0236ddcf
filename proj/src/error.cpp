#include "schoolconn/error.hpp"

namespace schoolconn {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidCoordinate: return "InvalidCoordinate";
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::LocalityViolation: return "LocalityViolation";
    case ErrorKind::EmptyBuffer: return "EmptyBuffer";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::UnknownClass: return "UnknownClass";
    case ErrorKind::EmptyLayer: return "EmptyLayer";
    case ErrorKind::MissingEmbedding: return "MissingEmbedding";
    case ErrorKind::UnknownColumn: return "UnknownColumn";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::DegenerateClass: return "DegenerateClass";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::UnsupportedFamily: return "UnsupportedFamily";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace schoolconn
