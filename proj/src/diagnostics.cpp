#include "mot/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>

#include "mot/errors.hpp"
#include "mot/solvers.hpp"

namespace mot {
namespace {

// Tight enough that rebalancing error stays far below the t^2 remainders the
// Taylor fits measure.
SinkhornConfig tight_sinkhorn() { return {1e-13, 20000, true}; }

TangentList scaled(const TangentList& xi, double t) {
  TangentList out;
  out.reserve(xi.size());
  for (const Matrix& m : xi) out.push_back(t * m);
  return out;
}

TangentList normalized(const ProductManifold& manifold, const Point& x,
                       TangentList xi) {
  const double n = manifold.norm(x, xi);
  for (Matrix& m : xi) m /= n;
  return xi;
}

TangentList assembled_rhess(const ProductManifold& manifold,
                            const Objective& obj, const Point& x,
                            const TangentList& xi, double fault) {
  const std::vector<Matrix> eg = obj.egrad(x);
  const std::vector<Matrix> eh = obj.ehess(x, xi);
  TangentList h = manifold.ehess_to_rhess(x, eg, eh, xi);
  if (fault != 0.0)
    for (Matrix& m : h) m *= 1.0 + fault;
  return h;
}

struct Battery {
  std::vector<PropertyCheck> checks;

  void add(std::string name, double threshold, bool larger_is_better,
           const std::function<double()>& measure) {
    PropertyCheck c;
    c.name = std::move(name);
    c.threshold = threshold;
    c.larger_is_better = larger_is_better;
    try {
      c.measured = measure();
      c.pass = larger_is_better ? c.measured >= threshold
                                : c.measured <= threshold;
    } catch (const std::exception& e) {
      c.pass = false;
      c.note = e.what();
    }
    checks.push_back(std::move(c));
  }

  void skip(std::string name, std::string note) {
    PropertyCheck c;
    c.name = std::move(name);
    c.pass = true;
    c.skipped = true;
    c.note = std::move(note);
    checks.push_back(std::move(c));
  }
};

}  // namespace

double fit_loglog_slope(std::span<const double> ts,
                        std::span<const double> remainders) {
  // Median of consecutive-pair slopes. A least-squares fit over the full
  // range is pulled below 2 by third-order terms at the large-t end (and by
  // the rebalancing noise floor at the small-t end for weakly curved
  // objectives); the median keeps the second-order signature while a
  // first-order error still reads as a slope of 1.
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (remainders[i] > 0.0) {
      xs.push_back(std::log(ts[i]));
      ys.push_back(std::log(remainders[i]));
    }
  }
  if (xs.size() < 2) return 10.0;  // remainders at rounding level throughout
  std::vector<double> slopes;
  slopes.reserve(xs.size() - 1);
  for (std::size_t i = 0; i + 1 < xs.size(); ++i)
    slopes.push_back((ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]));
  std::sort(slopes.begin(), slopes.end());
  const std::size_t k = slopes.size();
  return k % 2 == 1 ? slopes[k / 2]
                    : 0.5 * (slopes[k / 2 - 1] + slopes[k / 2]);
}

std::vector<double> log_grid(double lo, double hi, int count) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double f = count > 1 ? static_cast<double>(i) / (count - 1) : 0.0;
    out.push_back(lo * std::pow(hi / lo, f));
  }
  return out;
}

double gradient_taylor_slope(const ProductManifold& manifold,
                             const Objective& obj, const Point& x,
                             const TangentList& xi,
                             std::span<const double> ts) {
  const double f0 = obj.cost(x);
  const TangentList grad = manifold.egrad_to_rgrad(x, obj.egrad(x));
  const double slope_term = manifold.metric(x, grad, xi);
  std::vector<double> remainders;
  remainders.reserve(ts.size());
  for (double t : ts) {
    const Point y = manifold.retract(x, scaled(xi, t), tight_sinkhorn());
    remainders.push_back(std::abs(obj.cost(y) - f0 - t * slope_term));
  }
  return fit_loglog_slope(ts, remainders);
}

double retraction_order_slope(const Manifold& manifold, const Coupling& x,
                              const Matrix& xi, std::span<const double> ts) {
  std::vector<double> remainders;
  remainders.reserve(ts.size());
  for (double t : ts) {
    const Coupling y = manifold.retract(x, t * xi, tight_sinkhorn());
    remainders.push_back((y.plan - (x.plan + t * xi)).cwiseAbs().maxCoeff());
  }
  return fit_loglog_slope(ts, remainders);
}

double hessian_fd_error(const ProductManifold& manifold, const Objective& obj,
                        const Point& x, const TangentList& xi, double t,
                        double fault) {
  const TangentList h = assembled_rhess(manifold, obj, x, xi, fault);

  Point plus = x, minus = x;
  for (int c = 0; c < manifold.arity(); ++c) {
    plus[static_cast<std::size_t>(c)].plan += t * xi[static_cast<std::size_t>(c)];
    minus[static_cast<std::size_t>(c)].plan -= t * xi[static_cast<std::size_t>(c)];
  }
  const TangentList gp = manifold.egrad_to_rgrad(plus, obj.egrad(plus));
  const TangentList gm = manifold.egrad_to_rgrad(minus, obj.egrad(minus));
  const TangentList grad = manifold.egrad_to_rgrad(x, obj.egrad(x));

  TangentList fd;
  fd.reserve(xi.size());
  for (int c = 0; c < manifold.arity(); ++c) {
    const auto i = static_cast<std::size_t>(c);
    const Manifold& m = manifold.component(c);
    const Matrix dgrad = (gp[i] - gm[i]) / (2.0 * t);
    const Matrix correction =
        0.5 * grad[i].cwiseProduct(m.tangent_over_plan(x[i], xi[i]));
    fd.push_back(m.project_tangent(x[i], dgrad - correction));
  }

  TangentList diff;
  diff.reserve(xi.size());
  for (std::size_t i = 0; i < xi.size(); ++i) diff.push_back(fd[i] - h[i]);
  const double scale = manifold.norm(x, h);
  return manifold.norm(x, diff) / (scale > 0.0 ? scale : 1.0);
}

double self_adjointness_error(const ProductManifold& manifold,
                              const Objective& obj, const Point& x,
                              const TangentList& xi, const TangentList& eta) {
  const TangentList hxi = assembled_rhess(manifold, obj, x, xi, 0.0);
  const TangentList heta = assembled_rhess(manifold, obj, x, eta, 0.0);
  const double a = manifold.metric(x, hxi, eta);
  const double b = manifold.metric(x, xi, heta);
  const double scale = manifold.norm(x, hxi) * manifold.norm(x, eta) +
                       manifold.norm(x, xi) * manifold.norm(x, heta);
  return std::abs(a - b) / (scale > 0.0 ? scale : 1.0);
}

bool all_passed(std::span<const PropertyCheck> checks) {
  for (const PropertyCheck& c : checks)
    if (!c.pass) return false;
  return true;
}

std::vector<PropertyCheck> run_geometry_battery(const CheckOptions& options) {
  Battery battery;
  Rng rng(options.seed);
  const Index m = options.rows, n = options.cols;

  const Marginal mu1 = random_marginal(m, rng);
  const Marginal mu2 = random_marginal(n, rng);
  const Manifold manifold(mu1, mu2);
  const ProductManifold single({manifold});
  const Coupling gamma = manifold.random_point(rng, 0.1, tight_sinkhorn());
  const Point gamma1{gamma};

  const Matrix z = rng.normal_matrix(m, n);
  const Matrix proj = manifold.project_tangent(gamma, z);

  battery.add("projection_idempotence", 1e-10, false, [&] {
    return (manifold.project_tangent(gamma, proj) - proj)
        .cwiseAbs()
        .maxCoeff();
  });
  battery.add("projection_tangency", 1e-10, false, [&] {
    const double row = proj.rowwise().sum().cwiseAbs().maxCoeff();
    const double col = proj.colwise().sum().cwiseAbs().maxCoeff();
    return std::max(row, col);
  });
  battery.add("projection_orthogonality", 1e-10, false, [&] {
    const Matrix normal = z - proj;
    const Matrix tangent = manifold.random_tangent(gamma, rng);
    const double denom =
        manifold.norm(gamma, normal) * manifold.norm(gamma, tangent);
    return std::abs(manifold.metric(gamma, normal, tangent)) /
           (denom > 0.0 ? denom : 1.0);
  });
  battery.add("projection_gauge_invariance", 1e-12, false, [&] {
    ProjectionConfig pin, zero_mean;
    pin.gauge = ProjectionGauge::kPinLastBeta;
    zero_mean.gauge = ProjectionGauge::kZeroMeanBeta;
    return (manifold.project_tangent(gamma, z, pin) -
            manifold.project_tangent(gamma, z, zero_mean))
        .cwiseAbs()
        .maxCoeff();
  });

  battery.add("retraction_zero_step", 1e-10, false, [&] {
    const Coupling back = manifold.retract(
        gamma, Matrix::Zero(m, n), tight_sinkhorn());
    return (back.plan - gamma.plan).cwiseAbs().maxCoeff();
  });

  const std::vector<double> ts = log_grid(1e-5, 1e-1, 9);
  const Matrix xi_unit = [&] {
    Matrix xi = manifold.random_tangent(gamma, rng);
    return Matrix(xi / manifold.norm(gamma, xi));
  }();
  battery.add("retraction_first_order", 1.9, true, [&] {
    return retraction_order_slope(manifold, gamma, xi_unit, ts);
  });

  const LinearObjective linear(rng.uniform_matrix(m, n));
  const Matrix s1 = [&] {
    const Matrix a = rng.uniform_matrix(m, m);
    return Matrix((a + a.transpose()) / 2.0);
  }();
  const Matrix s2 = [&] {
    const Matrix a = rng.uniform_matrix(n, n);
    return Matrix((a + a.transpose()) / 2.0);
  }();
  const GwObjective gw(s1, s2);
  const RobustMaxObjective robust(
      {rng.uniform_matrix(m, n), rng.uniform_matrix(m, n),
       rng.uniform_matrix(m, n)},
      0.1);

  const TangentList xi1{xi_unit};
  battery.add("gradient_taylor_linear", 1.9, true, [&] {
    return gradient_taylor_slope(single, linear, gamma1, xi1, ts);
  });
  battery.add("gradient_taylor_gw", 1.9, true, [&] {
    return gradient_taylor_slope(single, gw, gamma1, xi1, ts);
  });
  battery.add("gradient_taylor_robust", 1.9, true, [&] {
    return gradient_taylor_slope(single, robust, gamma1, xi1, ts);
  });

  // Feature-space sizes for the two-coupling objective are fixed and small;
  // the sample-space sizes follow the requested dims.
  const Index d1 = 3, d2 = 4;
  const Marginal nu1 = random_marginal(d1, rng);
  const Marginal nu2 = random_marginal(d2, rng);
  const Manifold feature_manifold(nu1, nu2);
  const ProductManifold pair({manifold, feature_manifold});
  const CootData coot_data{rng.uniform_matrix(m, d1), rng.uniform_matrix(n, d2),
                           nu1, nu2};
  const CootObjective coot(coot_data, mu1, mu2);
  const Point xpair{gamma,
                    feature_manifold.random_point(rng, 0.1, tight_sinkhorn())};
  const TangentList xipair = normalized(
      pair, xpair,
      TangentList{manifold.random_tangent(xpair[0], rng),
                  feature_manifold.random_tangent(xpair[1], rng)});
  battery.add("gradient_taylor_coot", 1.9, true, [&] {
    return gradient_taylor_slope(pair, coot, xpair, xipair, ts);
  });

  battery.add("hessian_fd_linear", 1e-4, false, [&] {
    return hessian_fd_error(single, linear, gamma1, xi1, 1e-5,
                            options.hessian_fault);
  });
  battery.add("hessian_fd_gw", 1e-4, false, [&] {
    return hessian_fd_error(single, gw, gamma1, xi1, 1e-5,
                            options.hessian_fault);
  });

  const TangentList eta1{[&] {
    Matrix eta = manifold.random_tangent(gamma, rng);
    return Matrix(eta / manifold.norm(gamma, eta));
  }()};
  battery.add("hessian_self_adjoint_linear", 1e-8, false, [&] {
    return self_adjointness_error(single, linear, gamma1, xi1, eta1);
  });
  battery.add("hessian_self_adjoint_gw", 1e-8, false, [&] {
    return self_adjointness_error(single, gw, gamma1, xi1, eta1);
  });

  battery.add("oracle_gw_squared", 1e-10, false, [&] {
    const double reference = gw_reference_cost(
        gamma.plan, s1, s2,
        [](double a, double b) { return (a - b) * (a - b); });
    const double fast =
        gw_squared_constants(s1, s2, mu1, mu2) + 2.0 * gw.cost1(gamma);
    return std::abs(reference - fast);
  });
  battery.add("oracle_coot", 1e-10, false, [&] {
    const double reference = coot_reference_cost(
        xpair[0].plan, xpair[1].plan, coot_data.x, coot_data.z);
    return std::abs(reference - coot.cost(xpair));
  });

  if (manifold.tangent_dim() < 2) {
    battery.skip("cg_variants",
                 "tangent space is one-dimensional; variants coincide");
  } else {
    battery.add("cg_variants", 1e-6, false, [&] {
      const SquaredDistanceObjective quad(manifold.product_coupling().plan);
      double worst = 0.0;
      for (CgVariant variant :
           {CgVariant::kHestenesStiefel, CgVariant::kFletcherReeves}) {
        SolverConfig config;
        config.cg_variant = variant;
        // HS can clip to steepest descent throughout on this instance, which
        // converges but slowly; budget for that rather than for CG speed.
        config.max_iter = 3000;
        const SolveResult result = solve_rcg(manifold, quad, gamma, config);
        if (result.status != SolveStatus::kConverged)
          throw Error(std::string("RCG (") +
                      (variant == CgVariant::kHestenesStiefel ? "HS" : "FR") +
                      ") did not reach the gradient tolerance");
        for (std::size_t i = 1; i < result.trace.size(); ++i)
          if (result.trace[i].cost > result.trace[i - 1].cost)
            throw Error("RCG trace is not monotone");
        worst = std::max(worst, result.trace.back().grad_norm.value());
      }
      return worst;
    });
  }

  return battery.checks;
}

}  // namespace mot
