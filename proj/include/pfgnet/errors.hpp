#pragma once

#include <stdexcept>
#include <string>

namespace pfgnet {

/// Base of every error thrown by the library. The CLI maps ConfigError,
/// InputError, IoError and DegeneracyError to exit code 2 and everything
/// else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid hyperparameters, kernel sizes, or mismatched operand shapes.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent user data (frame counts, metric batches).
class InputError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Spectral quantities that are linearly dependent or otherwise singular.
class DegeneracyError : public Error {
 public:
  using Error::Error;
};

class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

}  // namespace pfgnet
