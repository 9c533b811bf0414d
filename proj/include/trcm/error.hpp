#pragma once

#include <stdexcept>
#include <string>

namespace trcm {

/// Bad arguments: shapes, ranges, malformed files, infeasible masks.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative routine hit its cap before meeting its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, int iterations, double residual)
      : std::runtime_error(what), iterations_(iterations), residual_(residual) {}

  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

/// A closed form or factorization produced something outside its domain.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A dense oracle path was asked to materialize more than its cap allows.
class CapExceeded : public std::length_error {
 public:
  using std::length_error::length_error;
};

}  // namespace trcm
