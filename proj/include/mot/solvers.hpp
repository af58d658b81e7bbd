// Riemannian solvers over a (product) coupling manifold: gradient descent
// with Armijo backtracking, conjugate gradients with projection transport,
// and a trust-region method with a truncated-CG inner solver.
#pragma once

#include <functional>
#include <optional>
#include <string_view>

#include "mot/objectives.hpp"
#include "mot/product_manifold.hpp"

namespace mot {

struct ArmijoConfig {
  double initial_step = 1.0;
  double backtrack = 0.5;
  double sufficient_decrease = 1e-4;
  int max_backtracks = 30;
};

enum class CgVariant { kHestenesStiefel, kFletcherReeves };

struct TrustRegionConfig {
  double initial_radius = 1.0;
  double max_radius = 100.0;
  double cg_tolerance = 0.1;  // kappa of the residual rule min(kappa, ||r0||)
  int cg_max_iter = 0;        // 0: tangent dimension + 5
};

struct SolverConfig {
  int max_iter = 500;
  std::optional<double> max_time_sec;
  double grad_tol = 1e-6;
  ArmijoConfig armijo{};
  CgVariant cg_variant = CgVariant::kHestenesStiefel;
  TrustRegionConfig tr{};
  SinkhornConfig sinkhorn{};      // retraction rebalancing
  ProjectionConfig projection{};  // tangent projection solves
  double exp_cap = kDefaultExpCap;
};

enum class SolveStatus { kConverged, kIterationCap, kTimeCap, kStepFailure };
std::string_view to_string(SolveStatus status);

struct TracePoint {
  int iter = 0;
  double elapsed_sec = 0.0;
  double cost = 0.0;
  std::optional<double> grad_norm;
  std::optional<double> step_size;
};

struct SolveResult {
  Point point;
  SolveStatus status = SolveStatus::kIterationCap;
  std::vector<TracePoint> trace;
  double final_cost() const { return trace.back().cost; }
};

SolveResult solve_rgd(const ProductManifold& manifold, const Objective& obj,
                      Point x0, const SolverConfig& config = {});
SolveResult solve_rcg(const ProductManifold& manifold, const Objective& obj,
                      Point x0, const SolverConfig& config = {});

// Model Hessian operator: maps (point, tangent tuple) to the Riemannian
// Hessian action. The default uses the objective's Euclidean Hessian through
// ehess_to_rhess.
using HessOperator =
    std::function<TangentList(std::span<const Coupling>, std::span<const Matrix>)>;

SolveResult solve_rtr(const ProductManifold& manifold, const Objective& obj,
                      Point x0, const SolverConfig& config = {});
SolveResult solve_rtr(const ProductManifold& manifold, const Objective& obj,
                      Point x0, const SolverConfig& config,
                      const HessOperator& hess);

// Single-manifold conveniences (arity-1 objectives).
SolveResult solve_rgd(const Manifold& manifold, const Objective& obj,
                      Coupling x0, const SolverConfig& config = {});
SolveResult solve_rcg(const Manifold& manifold, const Objective& obj,
                      Coupling x0, const SolverConfig& config = {});
SolveResult solve_rtr(const Manifold& manifold, const Objective& obj,
                      Coupling x0, const SolverConfig& config = {});

}  // namespace mot
