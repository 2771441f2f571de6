#pragma once

#include <stdexcept>
#include <string>

namespace c2f {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not satisfy an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An API precondition was violated (bad parameter, non-scalar loss, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration text or command-line parameter.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Missing or inconsistent input data (files, masks, dataset layout).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf showed up where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

enum class ParseErrorKind {
  kHeader,     // malformed image header
  kPayload,    // short or oversized image payload
  kMagic,      // checkpoint magic bytes mismatch
  kVersion,    // unsupported checkpoint version
  kTruncated,  // checkpoint ends early
  kManifest,   // checkpoint entries do not match the expected parameter set
};

/// Malformed file contents. `kind()` distinguishes the failure.
class ParseError : public DataError {
 public:
  ParseError(ParseErrorKind kind, const std::string& what) : DataError(what), kind_(kind) {}
  ParseErrorKind kind() const noexcept { return kind_; }

 private:
  ParseErrorKind kind_;
};

}  // namespace c2f
