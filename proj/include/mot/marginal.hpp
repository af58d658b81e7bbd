// Probability vectors on the open simplex: strictly positive, summing to one.
#pragma once

#include "mot/types.hpp"

namespace mot {

class Marginal {
 public:
  // Validates strict positivity and |sum - 1| <= tol (default 1e-12).
  explicit Marginal(Vector weights, double sum_tol = 1e-12);

  static Marginal uniform(Index n);

  const Vector& vec() const { return w_; }
  Index size() const { return w_.size(); }
  double operator[](Index i) const { return w_[i]; }

 private:
  Vector w_;
};

// Uniform sample from the simplex via sorted-uniform spacings; resamples on
// the (measure-zero) event of a zero spacing.
Marginal random_marginal(Index n, Rng& rng);

}  // namespace mot
