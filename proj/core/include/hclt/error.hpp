#pragma once

#include <stdexcept>
#include <string>

namespace hclt {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Two objects that must share a grid were built on different grids.
class GridMismatchError : public Error {
 public:
  using Error::Error;
};

/// A triangular-array index (n, m) is out of range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// An argument violates a documented precondition.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A covariance that should be positive semi-definite is not.
class CovarianceError : public Error {
 public:
  using Error::Error;
};

/// The estimator is only valid for Gaussian coefficient laws.
class UnsupportedLawError : public Error {
 public:
  using Error::Error;
};

/// No pair of elements agreeing on the observed part could be found.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration could not be parsed or validated.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace hclt
