// Comparison algorithms: Frank-Wolfe over the coupling polytope with an
// entropy-regularized LMO, its fixed-step-1 specialization, and alternating
// minimization for the two-coupling feature-matching problem.
#pragma once

#include <optional>

#include "mot/manifold.hpp"
#include "mot/objectives.hpp"
#include "mot/sinkhorn.hpp"
#include "mot/solvers.hpp"

namespace mot {

enum class FwStepRule {
  kHarmonic,        // gamma_t = 2 / (t + 2)
  kFixedOne,        // gamma_t = 1: iterate jumps to the LMO output
  kExactQuadratic,  // closed-form 1-D minimizer; quadratic costs only
};

struct FwConfig {
  double epsilon = 0.05;  // entropy weight inside the LMO
  FwStepRule steps = FwStepRule::kHarmonic;
  int max_iter = 500;
  std::optional<double> max_time_sec;
  SinkhornConfig sinkhorn;
};

// Iterates G <- (1 - gamma) G + gamma LMO(grad f(G)) and stops once the
// iterate moves by at most 1e-10 in the infinity norm. The reported cost is
// the plain objective; the entropic term lives only inside the LMO. The
// exact-quadratic rule falls back to the harmonic schedule for objectives
// that are not quadratic in G. With kFixedOne the trace leaves grad_norm and
// step_size empty (there is no step size or Riemannian reading to report).
// An LMO whose scaling runs out of sweeps ends the run with kStepFailure,
// keeping the last completed iterate and its trace.
SolveResult frank_wolfe(const Objective& obj, const Marginal& mu1,
                        const Marginal& mu2, Coupling x0,
                        const FwConfig& config = {});

// frank_wolfe with the step rule forced to kFixedOne.
SolveResult fw_fixed_step(const Objective& obj, const Marginal& mu1,
                          const Marginal& mu2, Coupling x0,
                          const FwConfig& config = {});

// Half-sweep cost matrices for alternating minimization:
// M1_ij = sum_kl (x_ik - z_jl)^2 g2_kl and the transposed analogue. The fast
// form expands the square and reads the constant terms off the feature
// marginals, which is exact when g2 (resp. g1) lies on its manifold.
Matrix coot_cost_matrix_g1(const CootData& data, const Matrix& g2);
Matrix coot_cost_matrix_g2(const CootData& data, const Matrix& g1);
// Quadruple-loop references for small dimensions (oracle for the fast forms).
Matrix coot_cost_matrix_g1_reference(const CootData& data, const Matrix& g2);
Matrix coot_cost_matrix_g2_reference(const CootData& data, const Matrix& g1);

// Alternating minimization: each sweep solves an entropic linear problem for
// g1 with g2 fixed, then for g2 with g1 fixed. Stops once both couplings move
// by at most 1e-10 in the infinity norm. One trace row per sweep, carrying
// the unregularized cost; grad_norm and step_size stay empty. Uses
// config.epsilon, config.max_iter, config.max_time_sec and config.sinkhorn;
// the step rule is ignored. A scaling failure inside either half-sweep ends
// the run with kStepFailure at the last completed sweep.
SolveResult coot_am(const CootData& data, const Marginal& mu1,
                    const Marginal& mu2, Matrix g1, Matrix g2,
                    const FwConfig& config = {});

}  // namespace mot
