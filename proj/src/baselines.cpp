#include "mot/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <utility>

#include "mot/errors.hpp"

namespace mot {
namespace {

using Clock = std::chrono::steady_clock;

constexpr double kStallTol = 1e-10;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool out_of_time(const FwConfig& config, Clock::time_point t0) {
  return config.max_time_sec && seconds_since(t0) >= *config.max_time_sec;
}

// Minimizes the quadratic through (0, f0), (1/2, fh), (1, f1) over [0, 1].
double quadratic_fit_step(double f0, double fh, double f1) {
  const double a = 2.0 * (f1 - 2.0 * fh + f0);
  const double b = f1 - f0 - a;
  if (a > 0.0) return std::clamp(-b / (2.0 * a), 0.0, 1.0);
  return f1 <= f0 ? 1.0 : 0.0;  // concave or linear: an endpoint wins
}

}  // namespace

SolveResult frank_wolfe(const Objective& obj, const Marginal& mu1,
                        const Marginal& mu2, Coupling x0,
                        const FwConfig& config) {
  if (obj.arity() != 1)
    throw ValidationError("frank_wolfe needs an arity-1 objective, got " +
                          std::to_string(obj.arity()));
  if (!(config.epsilon > 0.0))
    throw ValidationError("LMO epsilon must be positive");

  const Manifold manifold(mu1, mu2);
  manifold.validate_coupling(x0.plan);
  const bool fixed_one = config.steps == FwStepRule::kFixedOne;
  const bool exact = config.steps == FwStepRule::kExactQuadratic &&
                     obj.quadratic();
  const auto t0 = Clock::now();

  SolveResult result;
  result.point = Point{std::move(x0)};
  Coupling& cur = result.point.front();

  auto grad_norm = [&](const Coupling& g) -> std::optional<double> {
    if (fixed_one) return std::nullopt;
    return manifold.norm(g, manifold.egrad_to_rgrad(g, obj.egrad1(g)));
  };

  result.trace.push_back(
      {0, seconds_since(t0), obj.cost1(cur), grad_norm(cur), std::nullopt});

  int t = 0;
  while (true) {
    if (out_of_time(config, t0)) {
      result.status = SolveStatus::kTimeCap;
      break;
    }
    if (t >= config.max_iter) {
      result.status = SolveStatus::kIterationCap;
      break;
    }

    const Matrix grad = obj.egrad1(cur);
    Matrix target;
    try {
      target = entropic_lmo(grad, mu1, mu2, config.epsilon, config.sinkhorn);
    } catch (const SinkhornError&) {
      // The subproblem ran out of sweeps; stop with the last completed
      // iterate rather than losing the trajectory.
      result.status = SolveStatus::kStepFailure;
      break;
    }

    double gamma;
    if (fixed_one) {
      gamma = 1.0;
    } else if (exact) {
      const Matrix dir = target - cur.plan;
      const double f0 = result.trace.back().cost;
      const double fh = obj.cost1(Coupling{cur.plan + 0.5 * dir});
      const double f1 = obj.cost1(Coupling{target});
      gamma = quadratic_fit_step(f0, fh, f1);
    } else {
      gamma = 2.0 / (t + 2.0);
    }

    const Matrix next = (1.0 - gamma) * cur.plan + gamma * target;
    const double movement = (next - cur.plan).cwiseAbs().maxCoeff();
    cur.plan = next;
    manifold.validate_coupling(cur.plan);
    ++t;
    result.trace.push_back({t, seconds_since(t0), obj.cost1(cur),
                            grad_norm(cur),
                            fixed_one ? std::nullopt
                                      : std::optional<double>(gamma)});
    if (movement <= kStallTol) {
      result.status = SolveStatus::kConverged;
      break;
    }
  }
  return result;
}

SolveResult fw_fixed_step(const Objective& obj, const Marginal& mu1,
                          const Marginal& mu2, Coupling x0,
                          const FwConfig& config) {
  FwConfig fixed = config;
  fixed.steps = FwStepRule::kFixedOne;
  return frank_wolfe(obj, mu1, mu2, std::move(x0), fixed);
}

Matrix coot_cost_matrix_g1(const CootData& data, const Matrix& g2) {
  // Row/column sums of the fixed coupling rather than its nominal marginals:
  // that keeps the expansion exact even for slightly off-balance iterates.
  const Vector row_const =
      data.x.array().square().matrix() * g2.rowwise().sum();
  const Vector col_const =
      data.z.array().square().matrix() * g2.colwise().sum().transpose();
  Matrix m = -2.0 * data.x * g2 * data.z.transpose();
  m.colwise() += row_const;
  m.rowwise() += col_const.transpose();
  return m;
}

Matrix coot_cost_matrix_g2(const CootData& data, const Matrix& g1) {
  const Vector row_const =
      data.x.array().square().matrix().transpose() * g1.rowwise().sum();
  const Vector col_const =
      data.z.array().square().matrix().transpose() * g1.colwise().sum().transpose();
  Matrix m = -2.0 * data.x.transpose() * g1 * data.z;
  m.colwise() += row_const;
  m.rowwise() += col_const.transpose();
  return m;
}

Matrix coot_cost_matrix_g1_reference(const CootData& data, const Matrix& g2) {
  const Index m = data.x.rows(), n = data.z.rows();
  const Index d1 = data.x.cols(), d2 = data.z.cols();
  Matrix out = Matrix::Zero(m, n);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < n; ++j)
      for (Index k = 0; k < d1; ++k)
        for (Index l = 0; l < d2; ++l) {
          const double diff = data.x(i, k) - data.z(j, l);
          out(i, j) += diff * diff * g2(k, l);
        }
  return out;
}

Matrix coot_cost_matrix_g2_reference(const CootData& data, const Matrix& g1) {
  const Index m = data.x.rows(), n = data.z.rows();
  const Index d1 = data.x.cols(), d2 = data.z.cols();
  Matrix out = Matrix::Zero(d1, d2);
  for (Index k = 0; k < d1; ++k)
    for (Index l = 0; l < d2; ++l)
      for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j) {
          const double diff = data.x(i, k) - data.z(j, l);
          out(k, l) += diff * diff * g1(i, j);
        }
  return out;
}

SolveResult coot_am(const CootData& data, const Marginal& mu1,
                    const Marginal& mu2, Matrix g1, Matrix g2,
                    const FwConfig& config) {
  if (!(config.epsilon > 0.0))
    throw ValidationError("LMO epsilon must be positive");
  const CootObjective objective(data, mu1, mu2);
  const auto t0 = Clock::now();

  SolveResult result;
  result.point = Point{Coupling{std::move(g1)}, Coupling{std::move(g2)}};
  Matrix& p1 = result.point[0].plan;
  Matrix& p2 = result.point[1].plan;

  auto cost = [&] { return objective.cost(result.point); };
  result.trace.push_back(
      {0, seconds_since(t0), cost(), std::nullopt, std::nullopt});

  int sweep = 0;
  while (true) {
    if (out_of_time(config, t0)) {
      result.status = SolveStatus::kTimeCap;
      break;
    }
    if (sweep >= config.max_iter) {
      result.status = SolveStatus::kIterationCap;
      break;
    }

    Matrix next1, next2;
    try {
      next1 = entropic_lmo(coot_cost_matrix_g1(data, p2), mu1, mu2,
                           config.epsilon, config.sinkhorn);
      next2 = entropic_lmo(coot_cost_matrix_g2(data, next1), data.nu1,
                           data.nu2, config.epsilon, config.sinkhorn);
    } catch (const SinkhornError&) {
      // Keep the last fully swept pair; a half-updated sweep would leave the
      // point and the trace telling different stories.
      result.status = SolveStatus::kStepFailure;
      break;
    }
    const double move1 = (next1 - p1).cwiseAbs().maxCoeff();
    const double move2 = (next2 - p2).cwiseAbs().maxCoeff();
    p1 = std::move(next1);
    p2 = std::move(next2);

    ++sweep;
    result.trace.push_back(
        {sweep, seconds_since(t0), cost(), std::nullopt, std::nullopt});
    if (move1 <= kStallTol && move2 <= kStallTol) {
      result.status = SolveStatus::kConverged;
      break;
    }
  }
  return result;
}

}  // namespace mot
