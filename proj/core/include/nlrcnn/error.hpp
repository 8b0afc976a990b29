#pragma once

#include <stdexcept>
#include <string>

namespace nlrcnn {

// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (CSV rows, query identifiers, checkpoints).
class DataError : public Error {
 public:
  using Error::Error;
};

// Invalid model or training configuration, detected at build time.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values during prediction or training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace nlrcnn
