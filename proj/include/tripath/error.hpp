#pragma once
#include <stdexcept>
#include <string>

namespace tripath {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter violates its type invariant (negative rate, NaN, ...).
class InvalidConfigError : public Error {
 public:
  using Error::Error;
};

/// A detected rate has no finite, non-negative incident preimage.
class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

/// delta == 0, so kappa is undefined.
class DegenerateNormalizationError : public Error {
 public:
  using Error::Error;
};

class TotalInternalReflectionError : public Error {
 public:
  using Error::Error;
};

/// Expected event count of a simulation exceeds the configured cap.
class ResourceLimitError : public Error {
 public:
  using Error::Error;
};

/// An injected violation term drives a combination rate below zero.
class NegativeRateError : public Error {
 public:
  using Error::Error;
};

class NonConvergenceError : public Error {
 public:
  using Error::Error;
};

/// A predicted detected rate reaches the 1/tau ceiling.
class SaturationError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace tripath
