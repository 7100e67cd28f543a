#pragma once

#include <stdexcept>
#include <string>

namespace nlb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension or layer-shape mismatch between cooperating objects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file / JSON document.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was not met by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Rejection sampling ran out of attempts.
class SamplingError : public Error {
 public:
  using Error::Error;
};

}  // namespace nlb
