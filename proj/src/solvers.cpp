#include "mot/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <utility>

#include "mot/errors.hpp"

namespace mot {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Eval {
  double f = 0.0;
  std::vector<Matrix> egrads;
  TangentList grad;
  double gnorm = 0.0;
};

Eval evaluate(const ProductManifold& manifold, const Objective& obj,
              const Point& x, const ProjectionConfig& projection) {
  Eval e;
  e.f = obj.cost(x);
  e.egrads = obj.egrad(x);
  e.grad = manifold.egrad_to_rgrad(x, e.egrads, projection);
  e.gnorm = manifold.norm(x, e.grad);
  return e;
}

TangentList scaled(const TangentList& d, double t) {
  TangentList out;
  out.reserve(d.size());
  for (const Matrix& m : d) out.push_back(t * m);
  return out;
}

TangentList negated(const TangentList& d) { return scaled(d, -1.0); }

struct LineSearchHit {
  double step;
  Point x;
  double f;
};

std::optional<LineSearchHit> armijo_search(const ProductManifold& manifold,
                                           const Objective& obj,
                                           const Point& x, double f,
                                           const TangentList& d,
                                           double dir_deriv,
                                           const SolverConfig& config) {
  double t = config.armijo.initial_step;
  for (int attempt = 0; attempt <= config.armijo.max_backtracks; ++attempt) {
    bool retracted = true;
    Point cand;
    try {
      cand = manifold.retract(x, scaled(d, t), config.sinkhorn, config.exp_cap);
    } catch (const StepRejectedError&) {
      retracted = false;
    } catch (const SinkhornError&) {
      retracted = false;
    }
    if (retracted) {
      const double fc = obj.cost(cand);
      if (std::isfinite(fc) &&
          fc <= f + config.armijo.sufficient_decrease * t * dir_deriv)
        return LineSearchHit{t, std::move(cand), fc};
    }
    t *= config.armijo.backtrack;
  }
  return std::nullopt;
}

SolveResult run_descent(const ProductManifold& manifold, const Objective& obj,
                        Point x0, const SolverConfig& config,
                        bool conjugate) {
  manifold.validate_point(x0);
  const auto t0 = Clock::now();

  SolveResult result;
  result.point = std::move(x0);
  Eval e = evaluate(manifold, obj, result.point, config.projection);
  result.trace.push_back({0, seconds_since(t0), e.f, e.gnorm, std::nullopt});

  TangentList prev_grad, prev_dir;
  double prev_gnorm = 0.0;
  bool have_prev = false;

  int iter = 1;
  while (true) {
    if (e.gnorm <= config.grad_tol) {
      result.status = SolveStatus::kConverged;
      break;
    }
    if (config.max_time_sec && seconds_since(t0) >= *config.max_time_sec) {
      result.status = SolveStatus::kTimeCap;
      break;
    }
    if (iter > config.max_iter) {
      result.status = SolveStatus::kIterationCap;
      break;
    }

    // Near the boundary (where linear costs push the iterate) the projection
    // and rebalancing solvers eventually break down; that is the normal end
    // of the road for this geometry, reported as step-failure with the last
    // good iterate kept.
    try {
      TangentList d;
      double dir_deriv;
      bool steepest = !conjugate || !have_prev;
      if (!steepest) {
        // Transport the previous direction and gradient by projecting onto
        // the current tangent space. Near the boundary the transport system
        // conditions far worse than the gradient's (its input is not scaled
        // by the current plan); a failed transport is just a restart.
        try {
          const TangentList td = manifold.project_tangent(
              result.point, prev_dir, config.projection);
          double beta = 0.0;
          if (config.cg_variant == CgVariant::kFletcherReeves) {
            beta = (e.gnorm * e.gnorm) / (prev_gnorm * prev_gnorm);
          } else {
            const TangentList tg = manifold.project_tangent(
                result.point, prev_grad, config.projection);
            TangentList y;
            y.reserve(e.grad.size());
            for (std::size_t i = 0; i < e.grad.size(); ++i)
              y.push_back(e.grad[i] - tg[i]);
            const double num = manifold.metric(result.point, e.grad, y);
            const double den = manifold.metric(result.point, td, y);
            beta = den != 0.0 ? num / den : 0.0;
          }
          if (!std::isfinite(beta) || beta < 0.0) beta = 0.0;

          d.reserve(e.grad.size());
          for (std::size_t i = 0; i < e.grad.size(); ++i)
            d.push_back(-e.grad[i] + beta * td[i]);
          dir_deriv = manifold.metric(result.point, d, e.grad);
          if (dir_deriv >= 0.0) steepest = true;  // not a descent direction
        } catch (const ProjectionError&) {
          steepest = true;
        }
      }
      if (steepest) {
        d = negated(e.grad);
        dir_deriv = -e.gnorm * e.gnorm;
      }

      auto hit = armijo_search(manifold, obj, result.point, e.f, d, dir_deriv,
                               config);
      if (!hit && !steepest) {
        // A conjugate direction can be unretractable when the plan's entries
        // decay at very different rates (the transported term dwarfs the
        // current plan entrywise); restart before giving up.
        d = negated(e.grad);
        dir_deriv = -e.gnorm * e.gnorm;
        hit = armijo_search(manifold, obj, result.point, e.f, d, dir_deriv,
                            config);
      }
      if (!hit) {
        result.status = SolveStatus::kStepFailure;
        break;
      }
      Eval next;
      try {
        next = evaluate(manifold, obj, hit->x, config.projection);
      } catch (const ConvergenceError&) {
        // The step itself was sound (Armijo accepted it); keep the point even
        // though it is too close to the boundary to evaluate a gradient at.
        result.point = std::move(hit->x);
        result.trace.push_back(
            {iter, seconds_since(t0), hit->f, std::nullopt, hit->step});
        result.status = SolveStatus::kStepFailure;
        break;
      }
      if (conjugate) {
        prev_grad = std::move(e.grad);
        prev_dir = std::move(d);
        prev_gnorm = e.gnorm;
        have_prev = true;
      }
      result.point = std::move(hit->x);
      e = std::move(next);
      result.trace.push_back(
          {iter, seconds_since(t0), e.f, e.gnorm, hit->step});
      ++iter;
    } catch (const ConvergenceError&) {
      result.status = SolveStatus::kStepFailure;
      break;
    }
  }
  return result;
}

// Steihaug truncated CG on the trust-region model
// m(v) = g(grad, v) + 1/2 g(H v, v), ||v||_g <= radius.
struct TcgOutcome {
  TangentList step;
  bool hit_boundary = false;
};

TcgOutcome truncated_cg(const ProductManifold& manifold, const Point& x,
                        const Eval& e, const HessOperator& hess, double radius,
                        const SolverConfig& config) {
  const auto metric = [&](const TangentList& a, const TangentList& b) {
    return manifold.metric(x, a, b);
  };
  const Index dim_cap = config.tr.cg_max_iter > 0
                            ? config.tr.cg_max_iter
                            : manifold.tangent_dim() + 5;

  TcgOutcome out;
  out.step.reserve(e.grad.size());
  for (const Matrix& g : e.grad) out.step.push_back(Matrix::Zero(g.rows(), g.cols()));

  TangentList r = e.grad;
  TangentList p = negated(r);
  double rr = metric(r, r);
  const double stop =
      std::sqrt(rr) * std::min(config.tr.cg_tolerance, std::sqrt(rr));

  auto boundary_step = [&](const TangentList& eta, const TangentList& dir) {
    // Positive root of ||eta + tau dir||_g = radius.
    const double aa = metric(dir, dir);
    const double bb = metric(eta, dir);
    const double cc = metric(eta, eta) - radius * radius;
    const double disc = std::max(0.0, bb * bb - aa * cc);
    return (-bb + std::sqrt(disc)) / aa;
  };

  for (Index j = 0; j < dim_cap; ++j) {
    const TangentList hp = hess(x, p);
    const double php = metric(p, hp);
    if (!(php > 0.0)) {  // nonpositive curvature: ride p to the boundary
      const double tau = boundary_step(out.step, p);
      for (std::size_t i = 0; i < p.size(); ++i) out.step[i] += tau * p[i];
      out.hit_boundary = true;
      return out;
    }
    const double alpha = rr / php;
    TangentList next = out.step;
    for (std::size_t i = 0; i < p.size(); ++i) next[i] += alpha * p[i];
    if (std::sqrt(metric(next, next)) >= radius) {
      const double tau = boundary_step(out.step, p);
      for (std::size_t i = 0; i < p.size(); ++i) out.step[i] += tau * p[i];
      out.hit_boundary = true;
      return out;
    }
    out.step = std::move(next);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += alpha * hp[i];
    const double rr_next = metric(r, r);
    if (std::sqrt(rr_next) <= stop) return out;
    const double beta = rr_next / rr;
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = -r[i] + beta * p[i];
    rr = rr_next;
  }
  return out;
}

SolveResult run_rtr(const ProductManifold& manifold, const Objective& obj,
                    Point x0, const SolverConfig& config,
                    const HessOperator& hess) {
  manifold.validate_point(x0);
  const auto t0 = Clock::now();

  SolveResult result;
  result.point = std::move(x0);
  Eval e = evaluate(manifold, obj, result.point, config.projection);
  result.trace.push_back({0, seconds_since(t0), e.f, e.gnorm, std::nullopt});

  double radius = config.tr.initial_radius;
  int iter = 1;
  while (true) {
    if (e.gnorm <= config.grad_tol) {
      result.status = SolveStatus::kConverged;
      break;
    }
    if (config.max_time_sec && seconds_since(t0) >= *config.max_time_sec) {
      result.status = SolveStatus::kTimeCap;
      break;
    }
    if (iter > config.max_iter) {
      result.status = SolveStatus::kIterationCap;
      break;
    }
    if (radius < 1e-14) {
      result.status = SolveStatus::kStepFailure;
      break;
    }

    // As in the line-search drivers, projection/rebalancing breakdown near
    // the boundary terminates the run as step-failure.
    try {
      const TcgOutcome inner =
          truncated_cg(manifold, result.point, e, hess, radius, config);
      const TangentList h_eta = hess(result.point, inner.step);
      const double model_decrease =
          -(manifold.metric(result.point, e.grad, inner.step) +
            0.5 * manifold.metric(result.point, h_eta, inner.step));
      const double step_norm = manifold.norm(result.point, inner.step);

      bool rejected = false;
      double fc = 0.0;
      Point cand;
      try {
        cand = manifold.retract(result.point, inner.step, config.sinkhorn,
                                config.exp_cap);
        fc = obj.cost(cand);
        if (!std::isfinite(fc)) rejected = true;
      } catch (const StepRejectedError&) {
        rejected = true;
      } catch (const SinkhornError&) {
        rejected = true;
      }

      double rho = -1.0;
      if (!rejected && model_decrease > 0.0)
        rho = (e.f - fc) / model_decrease;

      if (rho < 0.25)
        radius *= 0.25;
      else if (rho > 0.75 && inner.hit_boundary)
        radius = std::min(2.0 * radius, config.tr.max_radius);

      if (!rejected && rho > 0.1 && fc <= e.f) {
        Eval next;
        try {
          next = evaluate(manifold, obj, cand, config.projection);
        } catch (const ConvergenceError&) {
          // Keep the accepted point even though the new gradient is out of
          // reach; the model already certified the decrease.
          result.point = std::move(cand);
          result.trace.push_back(
              {iter, seconds_since(t0), fc, std::nullopt, step_norm});
          result.status = SolveStatus::kStepFailure;
          break;
        }
        result.point = std::move(cand);
        e = std::move(next);
        result.trace.push_back(
            {iter, seconds_since(t0), e.f, e.gnorm, step_norm});
      }
      ++iter;
    } catch (const ConvergenceError&) {
      result.status = SolveStatus::kStepFailure;
      break;
    }
  }
  return result;
}

HessOperator objective_hess(const ProductManifold& manifold,
                            const Objective& obj,
                            const ProjectionConfig& projection) {
  if (!obj.has_ehess())
    throw ValidationError(
        "trust-region solver requires an objective with a Hessian");
  return [&manifold, &obj, projection](std::span<const Coupling> x,
                                       std::span<const Matrix> v) {
    const std::vector<Matrix> eg = obj.egrad(x);
    const std::vector<Matrix> eh = obj.ehess(x, v);
    return manifold.ehess_to_rhess(x, eg, eh, v, projection);
  };
}

void check_objective_arity(const ProductManifold& manifold,
                           const Objective& obj) {
  if (obj.arity() != manifold.arity())
    throw ValidationError("objective arity " + std::to_string(obj.arity()) +
                          " does not match manifold arity " +
                          std::to_string(manifold.arity()));
}

}  // namespace

std::string_view to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::kConverged:
      return "converged";
    case SolveStatus::kIterationCap:
      return "iteration-cap";
    case SolveStatus::kTimeCap:
      return "time-cap";
    case SolveStatus::kStepFailure:
      return "step-failure";
  }
  return "unknown";
}

SolveResult solve_rgd(const ProductManifold& manifold, const Objective& obj,
                      Point x0, const SolverConfig& config) {
  check_objective_arity(manifold, obj);
  return run_descent(manifold, obj, std::move(x0), config, false);
}

SolveResult solve_rcg(const ProductManifold& manifold, const Objective& obj,
                      Point x0, const SolverConfig& config) {
  check_objective_arity(manifold, obj);
  return run_descent(manifold, obj, std::move(x0), config, true);
}

SolveResult solve_rtr(const ProductManifold& manifold, const Objective& obj,
                      Point x0, const SolverConfig& config) {
  check_objective_arity(manifold, obj);
  return run_rtr(manifold, obj, std::move(x0), config,
                 objective_hess(manifold, obj, config.projection));
}

SolveResult solve_rtr(const ProductManifold& manifold, const Objective& obj,
                      Point x0, const SolverConfig& config,
                      const HessOperator& hess) {
  check_objective_arity(manifold, obj);
  return run_rtr(manifold, obj, std::move(x0), config, hess);
}

SolveResult solve_rgd(const Manifold& manifold, const Objective& obj,
                      Coupling x0, const SolverConfig& config) {
  return solve_rgd(ProductManifold({manifold}), obj, Point{std::move(x0)},
                   config);
}

SolveResult solve_rcg(const Manifold& manifold, const Objective& obj,
                      Coupling x0, const SolverConfig& config) {
  return solve_rcg(ProductManifold({manifold}), obj, Point{std::move(x0)},
                   config);
}

SolveResult solve_rtr(const Manifold& manifold, const Objective& obj,
                      Coupling x0, const SolverConfig& config) {
  return solve_rtr(ProductManifold({manifold}), obj, Point{std::move(x0)},
                   config);
}

}  // namespace mot
