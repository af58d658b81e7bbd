// Exception hierarchy: validation failures for malformed inputs, convergence
// failures carrying the final residual, and rejected retraction steps.
#pragma once

#include <stdexcept>
#include <string>

namespace mot {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inputs that violate a documented precondition (bad shapes, non-simplex
// weights, infeasible masks, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// An iterative routine hit its iteration cap before reaching tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}

  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

// Sinkhorn rebalancing did not reach the marginal tolerance.
class SinkhornError : public ConvergenceError {
 public:
  using ConvergenceError::ConvergenceError;
};

// Tangent projection solve did not reach tolerance.
class ProjectionError : public ConvergenceError {
 public:
  using ConvergenceError::ConvergenceError;
};

// Retraction refused a step whose elementwise exponent would overflow.
class StepRejectedError : public Error {
 public:
  StepRejectedError(const std::string& what, double max_exponent)
      : Error(what), max_exponent_(max_exponent) {}

  double max_exponent() const { return max_exponent_; }

 private:
  double max_exponent_;
};

}  // namespace mot
