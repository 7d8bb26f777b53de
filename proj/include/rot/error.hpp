#pragma once

#include <stdexcept>
#include <string>

#include "rot/types.hpp"

namespace rot {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument or violated precondition.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A point lies outside the domain of a regularizer or its conjugate.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A marginal has zero entries and the caller must solve on the reduced support.
class ReductionRequired : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Singular or ill-conditioned linear algebra, or an inconsistent result.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, Index iterations)
      : Error(what + " (residual " + std::to_string(residual) + " after " +
              std::to_string(iterations) + " iterations)"),
        residual_(residual),
        iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  Index iterations() const noexcept { return iterations_; }

 private:
  double residual_;
  Index iterations_;
};

}  // namespace rot
