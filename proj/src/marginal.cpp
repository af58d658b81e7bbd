#include "mot/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mot/errors.hpp"

namespace mot {

Marginal::Marginal(Vector weights, double sum_tol) : w_(std::move(weights)) {
  if (w_.size() == 0) throw ValidationError("marginal must be nonempty");
  for (Index i = 0; i < w_.size(); ++i) {
    if (!(w_[i] > 0.0))
      throw ValidationError("marginal entry " + std::to_string(i) +
                            " is not strictly positive");
  }
  const double s = w_.sum();
  if (std::abs(s - 1.0) > sum_tol)
    throw ValidationError("marginal sums to " + std::to_string(s) +
                          ", expected 1 within " + std::to_string(sum_tol));
}

Marginal Marginal::uniform(Index n) {
  return Marginal(Vector::Constant(n, 1.0 / static_cast<double>(n)));
}

Marginal random_marginal(Index n, Rng& rng) {
  if (n <= 0) throw ValidationError("marginal must be nonempty");
  while (true) {
    std::vector<double> cuts(static_cast<std::size_t>(n) + 1);
    cuts.front() = 0.0;
    cuts.back() = 1.0;
    for (Index i = 1; i < n; ++i) cuts[static_cast<std::size_t>(i)] = rng.uniform();
    std::sort(cuts.begin(), cuts.end());
    Vector w(n);
    bool positive = true;
    for (Index i = 0; i < n; ++i) {
      w[i] = cuts[static_cast<std::size_t>(i) + 1] - cuts[static_cast<std::size_t>(i)];
      positive = positive && w[i] > 0.0;
    }
    if (!positive) continue;
    return Marginal(w / w.sum());
  }
}

}  // namespace mot
