// Self-checks for the geometry and the derivative oracles: projection and
// retraction properties, Taylor-order fits for gradients, finite-difference
// and self-adjointness checks for Hessians, and fast-vs-reference objective
// comparisons. Backs the `check` CLI subcommand and the acceptance tests.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "mot/objectives.hpp"
#include "mot/product_manifold.hpp"

namespace mot {

struct PropertyCheck {
  std::string name;
  bool pass = false;
  bool skipped = false;
  double measured = 0.0;
  double threshold = 0.0;
  bool larger_is_better = false;  // slopes pass above, residuals below
  std::string note;
};

struct CheckOptions {
  Index rows = 4;
  Index cols = 5;
  std::uint64_t seed = 7;
  // Relative perturbation injected into the assembled Hessian; nonzero values
  // exist to prove the finite-difference check can catch a wrong formula.
  double hessian_fault = 0.0;
};

std::vector<PropertyCheck> run_geometry_battery(const CheckOptions& options = {});
bool all_passed(std::span<const PropertyCheck> checks);

// Least-squares slope of log(remainder) against log(t); pairs with
// non-positive remainders (already at rounding level) are dropped, and a
// fit with fewer than two usable points reports a large slope.
double fit_loglog_slope(std::span<const double> ts,
                        std::span<const double> remainders);

// Geometric grid of count points from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, int count);

// Slope of |f(R_x(t xi)) - f(x) - t g(grad, xi)| over the given t grid;
// second-order for a correct gradient.
double gradient_taylor_slope(const ProductManifold& manifold,
                             const Objective& obj, const Point& x,
                             const TangentList& xi, std::span<const double> ts);

// Slope of |R_x(t xi) - (x + t xi)|_inf over the t grid; second-order for a
// first-order retraction.
double retraction_order_slope(const Manifold& manifold, const Coupling& x,
                              const Matrix& xi, std::span<const double> ts);

// Relative metric-norm error between the assembled Hessian and a central
// finite difference of gradients along the straight line x + t xi (the
// curvature correction applied analytically). `fault` scales the assembled
// Hessian, for fault-injection runs.
double hessian_fd_error(const ProductManifold& manifold, const Objective& obj,
                        const Point& x, const TangentList& xi, double t = 1e-5,
                        double fault = 0.0);

// Relative asymmetry |g(H xi, eta) - g(xi, H eta)| / (|H xi| |eta| + |xi| |H eta|).
double self_adjointness_error(const ProductManifold& manifold,
                              const Objective& obj, const Point& x,
                              const TangentList& xi, const TangentList& eta);

}  // namespace mot
