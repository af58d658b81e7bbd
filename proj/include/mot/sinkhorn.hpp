// Kernel rebalancing (Sinkhorn scaling) in linear and log domain, and the
// entropy-regularized linear minimization oracle built on top of it.
#pragma once

#include "mot/marginal.hpp"
#include "mot/types.hpp"

namespace mot {

struct SinkhornConfig {
  double tol = 1e-9;     // infinity-norm marginal violation at which to stop
  int max_iter = 10000;  // full row+column sweeps before giving up
  bool log_domain = true;
};

struct SinkhornResult {
  Matrix plan;
  int iterations = 0;
  double residual = 0.0;
};

// Rescales a nonnegative kernel to the prescribed marginals. Exact zeros mark
// excluded entries and are preserved; zero rows or columns are rejected.
// Throws SinkhornError when the tolerance is not met within max_iter sweeps.
SinkhornResult sinkhorn_scale(const Matrix& kernel, const Marginal& mu1,
                              const Marginal& mu2,
                              const SinkhornConfig& config = {});

// Same, but the kernel is given elementwise in log space (-inf marks an
// excluded entry). Always runs the stabilized log-domain loop.
SinkhornResult sinkhorn_scale_log(const Matrix& log_kernel, const Marginal& mu1,
                                  const Marginal& mu2,
                                  const SinkhornConfig& config = {});

// Minimizes <plan, grad> + epsilon * sum(plan .* log(plan)) over couplings
// with the given marginals; the minimizer is the rebalanced Gibbs kernel
// exp(-grad / epsilon). Linear-domain evaluation falls back to log domain when
// the kernel underflows to an exact zero.
Matrix entropic_lmo(const Matrix& grad, const Marginal& mu1,
                    const Marginal& mu2, double epsilon,
                    const SinkhornConfig& config = {});

}  // namespace mot
