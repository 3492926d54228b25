#pragma once

#include <stdexcept>
#include <string>

namespace soynet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents do not satisfy an operation's preconditions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A required field is missing or has the wrong type in an input document.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Input parsed fine but violates a domain invariant (e.g. a point outside its image).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or unsupported configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An assignment problem with more rows than columns; a configuration problem (too few anchors).
class InfeasibleError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// File could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace soynet
