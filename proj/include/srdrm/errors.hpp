#pragma once

#include <stdexcept>
#include <string>

namespace srdrm {

// Root of every error raised by the library. The CLI maps NumericError to
// exit status 2 and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (shapes, ranges, channel counts).
class ContractError : public Error {
 public:
  using Error::Error;
};

// An architecture or training configuration is invalid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A file does not parse as the expected format.
class FormatError : public Error {
 public:
  using Error::Error;
};

// A checkpoint was written by an unsupported format version.
class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

// A checkpoint entry failed its checksum or was truncated.
class CorruptionError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Filesystem problems: unreadable or unwritable paths.
class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite values during training or gradient checking.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace srdrm
