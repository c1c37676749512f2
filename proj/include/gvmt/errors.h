#pragma once

#include <stdexcept>
#include <string>

namespace gvmt {

// Base of every error raised by the library. The CLI maps the concrete
// subclass to a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes or sizes that do not fit together.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameters, flags or a config/checkpoint mismatch.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent input files.
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf in a loss or gradient, or an empty attention row.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace gvmt
