#pragma once

#include <stdexcept>
#include <string>

namespace lgap {

/// Error categories shared by the C++ core, the C API status codes and the
/// CLI exit codes.
enum class ErrorKind {
  Config,        ///< invalid configuration or parameter
  Precondition,  ///< operation called on input that violates its contract
  Format,        ///< malformed file (names the offending field)
  Data,          ///< well-formed file with invalid content (NaN, misalignment)
  Io,            ///< filesystem failure
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& what) : Error(ErrorKind::Precondition, what) {}
};

/// `field` is the name of the header/payload element that failed validation.
class FormatError : public Error {
 public:
  FormatError(std::string field, const std::string& detail)
      : Error(ErrorKind::Format, field + ": " + detail), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

}  // namespace lgap
