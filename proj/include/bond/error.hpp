#pragma once

#include <stdexcept>
#include <string>

namespace bond {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown prompt id, outcome index or column.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An enumeration (outcome space or brute-force tuples) would exceed its cap.
class CapExceeded : public Error {
 public:
  using Error::Error;
};

/// Two parameter vectors do not share an index map.
class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

/// KL(p||q) with q(y) = 0 where p(y) > 0.
class DivergenceInfinite : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace bond
