// Release gate: every check this binary prints must pass before a change
// ships. Each criterion prints exactly one PASS/FAIL line; the exit code is
// the number of failures.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mot/baselines.hpp"
#include "mot/diagnostics.hpp"
#include "mot/errors.hpp"
#include "mot/manifold.hpp"
#include "mot/objectives.hpp"
#include "mot/product_manifold.hpp"
#include "mot/sinkhorn.hpp"
#include "mot/solvers.hpp"
#include "mot/support_mask.hpp"

using namespace mot;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, ...) {
  va_list args;
  va_start(args, format);
  char buf[512];
  std::vsnprintf(buf, sizeof(buf), format, args);
  va_end(args);
  return buf;
}

SinkhornConfig tight() { return {1e-13, 50000, true}; }

// Rescale a tangent so the worst elementwise |xi / gamma| ratio is rho; keeps
// retraction probes inside the exponent cap without changing the direction.
TangentList capped(const Point& x, TangentList xi, double rho = 5.0) {
  double worst = 0.0;
  for (std::size_t k = 0; k < xi.size(); ++k)
    worst = std::max(worst,
                     xi[k].cwiseQuotient(x[k].plan).cwiseAbs().maxCoeff());
  if (worst > rho)
    for (Matrix& m : xi) m *= rho / worst;
  return xi;
}

ProductManifold single(Marginal mu1, Marginal mu2) {
  std::vector<Manifold> parts;
  parts.emplace_back(std::move(mu1), std::move(mu2));
  return ProductManifold(std::move(parts));
}

bool monotone(const std::vector<TracePoint>& trace) {
  for (std::size_t i = 1; i < trace.size(); ++i) {
    const double slack = 1e-12 * std::max(1.0, std::abs(trace[i - 1].cost));
    if (trace[i].cost > trace[i - 1].cost + slack) return false;
  }
  return true;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t k = v.size();
  return k % 2 == 1 ? v[k / 2] : 0.5 * (v[k / 2 - 1] + v[k / 2]);
}

// --- criterion 1: projection geometry across seeds ---
Outcome criterion_geometry() {
  Timer timer;
  double worst_projection = 0.0, worst_gauge = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    CheckOptions options;
    options.rows = 4;
    options.cols = 5;
    options.seed = seed;
    const std::vector<PropertyCheck> checks = run_geometry_battery(options);
    for (const PropertyCheck& c : checks) {
      if (c.name.rfind("projection_", 0) != 0) continue;
      if (!c.pass)
        return {false, fmt("seed %llu: %s measured %.3e exceeds %.1e",
                           static_cast<unsigned long long>(seed),
                           c.name.c_str(), c.measured, c.threshold)};
      if (c.name == "projection_gauge_invariance")
        worst_gauge = std::max(worst_gauge, c.measured);
      else
        worst_projection = std::max(worst_projection, c.measured);
    }
  }
  const double t = timer.elapsed();
  if (t >= 5.0) return {false, fmt("runtime %.2f s exceeds 5 s", t)};
  return {true, fmt("10 seeds, worst residual %.2e, worst gauge drift %.2e, "
                    "%.2f s",
                    worst_projection, worst_gauge, t)};
}

// --- criterion 2: gradient Taylor order for all objective families ---
Outcome criterion_taylor() {
  Rng rng(202);
  const std::vector<double> ts = log_grid(1e-5, 1e-1, 9);
  double min_slope = 1e300;
  std::string min_name;

  const ProductManifold pm = single(random_marginal(4, rng),
                                    random_marginal(5, rng));
  const LinearObjective linear(rng.uniform_matrix(4, 5));
  const GwObjective gw(rng.normal_matrix(4, 4), rng.normal_matrix(5, 5));
  const RobustMaxObjective robust(
      {rng.uniform_matrix(4, 5), rng.uniform_matrix(4, 5),
       rng.uniform_matrix(4, 5)},
      0.1);
  const std::vector<std::pair<const Objective*, const char*>> singles{
      {&linear, "linear"}, {&gw, "gw"}, {&robust, "robust"}};
  for (const auto& [obj, name] : singles) {
    for (int trial = 0; trial < 5; ++trial) {
      const Point x = pm.random_point(rng, 0.1, tight());
      const TangentList xi = capped(x, pm.random_tangent(x, rng));
      const double slope = gradient_taylor_slope(pm, *obj, x, xi, ts);
      if (slope < min_slope) {
        min_slope = slope;
        min_name = name;
      }
    }
  }

  CootData data{rng.normal_matrix(4, 3), rng.normal_matrix(5, 3),
                random_marginal(3, rng), random_marginal(3, rng)};
  const Marginal mu1 = random_marginal(4, rng);
  const Marginal mu2 = random_marginal(5, rng);
  const CootObjective coot(data, mu1, mu2);
  std::vector<Manifold> parts;
  parts.emplace_back(mu1, mu2);
  parts.emplace_back(data.nu1, data.nu2);
  const ProductManifold pair(std::move(parts));
  for (int trial = 0; trial < 5; ++trial) {
    const Point x = pair.random_point(rng, 0.1, tight());
    const TangentList xi = capped(x, pair.random_tangent(x, rng));
    const double slope = gradient_taylor_slope(pair, coot, x, xi, ts);
    if (slope < min_slope) {
      min_slope = slope;
      min_name = "coot";
    }
  }

  if (min_slope < 1.9)
    return {false, fmt("%s slope %.3f below 1.9", min_name.c_str(), min_slope)};
  return {true, fmt("min slope %.3f (%s) across 4 families x 5 points",
                    min_slope, min_name.c_str())};
}

// --- criterion 3: assembled Hessian vs finite differences, self-adjointness ---
Outcome criterion_hessian() {
  Rng rng(303);
  const ProductManifold pm = single(random_marginal(4, rng),
                                    random_marginal(5, rng));
  const LinearObjective linear(rng.uniform_matrix(4, 5));
  const GwObjective gw(rng.normal_matrix(4, 4), rng.normal_matrix(5, 5));
  double worst_fd = 0.0, worst_adjoint = 0.0;
  for (const Objective* obj : {static_cast<const Objective*>(&linear),
                               static_cast<const Objective*>(&gw)}) {
    for (int trial = 0; trial < 5; ++trial) {
      const Point x = pm.random_point(rng, 0.1, tight());
      const TangentList xi = pm.random_tangent(x, rng);
      const TangentList eta = pm.random_tangent(x, rng);
      worst_fd = std::max(worst_fd, hessian_fd_error(pm, *obj, x, xi, 1e-5));
      worst_adjoint =
          std::max(worst_adjoint, self_adjointness_error(pm, *obj, x, xi, eta));
    }
  }
  if (worst_fd > 1e-4)
    return {false, fmt("finite-difference error %.3e exceeds 1e-4", worst_fd)};
  if (worst_adjoint > 1e-8)
    return {false, fmt("self-adjointness error %.3e exceeds 1e-8",
                       worst_adjoint)};
  return {true, fmt("fd error %.2e (<= 1e-4), asymmetry %.2e (<= 1e-8)",
                    worst_fd, worst_adjoint)};
}

// --- criterion 4: linear OT vs permutation enumeration ---
Outcome criterion_linear_ot() {
  Rng rng(404);
  double worst_excess = -1e300;
  double worst_time = 0.0;
  for (Index n = 2; n <= 4; ++n) {
    const Manifold man(Marginal::uniform(n), Marginal::uniform(n));
    for (int instance = 0; instance < 20; ++instance) {
      const Matrix c = rng.uniform_matrix(n, n);
      Timer timer;

      SolverConfig cfg;
      cfg.max_iter = 2000;
      const SolveResult r =
          solve_rcg(man, LinearObjective(c), man.random_point(rng), cfg);

      std::vector<Index> perm(static_cast<std::size_t>(n));
      std::iota(perm.begin(), perm.end(), Index{0});
      double best = 1e300;
      do {
        double cost = 0.0;
        for (Index i = 0; i < n; ++i)
          cost += c(i, perm[static_cast<std::size_t>(i)]);
        best = std::min(best, cost / static_cast<double>(n));
      } while (std::next_permutation(perm.begin(), perm.end()));

      const double t = timer.elapsed();
      worst_time = std::max(worst_time, t);
      if (t >= 5.0)
        return {false, fmt("n=%d instance %d took %.2f s", int(n), instance, t)};
      worst_excess = std::max(worst_excess, r.final_cost() - best);
      if (r.final_cost() > best + 1e-3)
        return {false,
                fmt("n=%d instance %d: cost %.6f vs optimum %.6f (+%.2e)",
                    int(n), instance, r.final_cost(), best,
                    r.final_cost() - best)};
    }
  }
  return {true, fmt("60 instances, worst excess over optimum %.2e, "
                    "slowest %.3f s",
                    worst_excess, worst_time)};
}

// --- criterion 5: fast objective forms vs quadruple-loop references ---
Outcome criterion_objective_oracles() {
  const auto squared = [](double a, double b) { return (a - b) * (a - b); };
  double worst_gw = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const Index m = 2 + static_cast<Index>(rng.next_u64() % 3);
    const Index n = 2 + static_cast<Index>(rng.next_u64() % 3);
    const Manifold man(random_marginal(m, rng), random_marginal(n, rng));
    const Coupling g = man.random_point(rng, 0.1, tight());
    const Matrix s1 = rng.normal_matrix(m, m);
    const Matrix s2 = rng.normal_matrix(n, n);
    const GwObjective obj(s1, s2);
    const double fast = gw_squared_constants(s1, s2, man.mu1(), man.mu2()) +
                        2.0 * obj.cost1(g);
    worst_gw = std::max(worst_gw,
                        std::abs(fast - gw_reference_cost(g.plan, s1, s2,
                                                          squared)));
  }
  if (worst_gw > 1e-10)
    return {false, fmt("gw fast-vs-reference gap %.3e exceeds 1e-10",
                       worst_gw)};

  double worst_coot = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed * 7 + 1);
    const Index m = 2 + static_cast<Index>(rng.next_u64() % 3);
    const Index n = 2 + static_cast<Index>(rng.next_u64() % 3);
    const Index d1 = 2 + static_cast<Index>(rng.next_u64() % 3);
    const Index d2 = 2 + static_cast<Index>(rng.next_u64() % 3);
    CootData data{rng.normal_matrix(m, d1), rng.normal_matrix(n, d2),
                  random_marginal(d1, rng), random_marginal(d2, rng)};
    const Marginal mu1 = random_marginal(m, rng);
    const Marginal mu2 = random_marginal(n, rng);
    const CootObjective obj(data, mu1, mu2);
    const Manifold sample_man(mu1, mu2);
    const Manifold feature_man(data.nu1, data.nu2);
    const Point x{sample_man.random_point(rng, 0.1, tight()),
                  feature_man.random_point(rng, 0.1, tight())};
    worst_coot = std::max(
        worst_coot, std::abs(obj.cost(x) - coot_reference_cost(
                                               x[0].plan, x[1].plan, data.x,
                                               data.z)));
  }
  if (worst_coot > 1e-10)
    return {false, fmt("coot fast-vs-reference gap %.3e exceeds 1e-10",
                       worst_coot)};
  return {true, fmt("gw gap %.2e, coot gap %.2e over 20 seeds each",
                    worst_gw, worst_coot)};
}

// --- criterion 6: scaling on hard kernels plus closed forms ---
Outcome criterion_sinkhorn() {
  double worst_residual = 0.0;
  int worst_iterations = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const Index m = 6, n = 5;
    Matrix logk(m, n);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < n; ++j) logk(i, j) = -50.0 * rng.uniform();
    const Marginal mu1 = random_marginal(m, rng);
    const Marginal mu2 = random_marginal(n, rng);
    const SinkhornResult r =
        sinkhorn_scale_log(logk, mu1, mu2, {1e-9, 10000, true});
    const double row =
        (r.plan.rowwise().sum() - mu1.vec()).cwiseAbs().maxCoeff();
    const double col = (r.plan.colwise().sum().transpose() - mu2.vec())
                           .cwiseAbs()
                           .maxCoeff();
    worst_residual = std::max({worst_residual, row, col});
    worst_iterations = std::max(worst_iterations, r.iterations);
    if (std::max(row, col) > 1e-9)
      return {false, fmt("seed %llu residual %.3e exceeds 1e-9",
                         static_cast<unsigned long long>(seed),
                         std::max(row, col))};
  }

  Rng rng(606);
  const Marginal mu1 = random_marginal(3, rng);
  const Marginal mu2 = random_marginal(4, rng);
  const Matrix product =
      sinkhorn_scale(Matrix::Ones(3, 4), mu1, mu2, {1e-13, 100, false}).plan;
  const double product_gap =
      (product - mu1.vec() * mu2.vec().transpose()).cwiseAbs().maxCoeff();

  Matrix k(2, 2);
  k << 2, 1, 1, 2;
  const Marginal u = Marginal::uniform(2);
  Matrix expect(2, 2);
  expect << 1.0 / 3, 1.0 / 6, 1.0 / 6, 1.0 / 3;
  const double symmetric_gap =
      (sinkhorn_scale(k, u, u, {1e-13, 10000, false}).plan - expect)
          .cwiseAbs()
          .maxCoeff();

  if (product_gap > 1e-12 || symmetric_gap > 1e-12)
    return {false, fmt("closed-form gaps %.3e / %.3e exceed 1e-12",
                       product_gap, symmetric_gap)};
  return {true, fmt("hard kernels: residual %.2e in <= %d sweeps; closed "
                    "forms %.1e / %.1e",
                    worst_residual, worst_iterations, product_gap,
                    symmetric_gap)};
}

// --- criterion 7: head-to-head against the polytope baselines ---
Outcome criterion_head_to_head() {
  Timer total;
  const double budget = 10.0;

  SolverConfig mot_cfg;
  mot_cfg.max_iter = 1 << 30;
  mot_cfg.grad_tol = 1e-12;
  mot_cfg.max_time_sec = budget;

  FwConfig base_cfg;
  base_cfg.max_iter = 1 << 30;
  base_cfg.max_time_sec = budget;
  // Concentrated iterates make some LMO kernels slow to rebalance; the time
  // budget, not the sweep cap, should decide when the baseline stops.
  base_cfg.sinkhorn = {1e-9, 500000, true};

  std::vector<double> gw_mot, gw_base;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(700 + seed);
    const Index n = 30;
    const Marginal mu = Marginal::uniform(n);
    const Manifold man(mu, mu);
    const Matrix a1 = rng.normal_matrix(n, n);
    const Matrix a2 = rng.normal_matrix(n, n);
    const GwObjective obj(Matrix((a1 + a1.transpose()) / 2.0),
                          Matrix((a2 + a2.transpose()) / 2.0));
    const Coupling x0 = man.product_coupling();

    const SolveResult mot = solve_rcg(man, obj, x0, mot_cfg);
    if (!monotone(mot.trace))
      return {false, fmt("gw seed %llu: RCG trace not monotone",
                         static_cast<unsigned long long>(seed))};
    gw_mot.push_back(mot.final_cost());

    const SolveResult base = fw_fixed_step(obj, mu, mu, x0, base_cfg);
    gw_base.push_back(base.final_cost());
  }
  const double gw_med_mot = median(gw_mot);
  const double gw_med_base = median(gw_base);
  if (gw_med_mot > gw_med_base + 0.05 * std::abs(gw_med_base))
    return {false, fmt("gw medians: %.6f vs baseline %.6f", gw_med_mot,
                       gw_med_base)};

  std::vector<double> coot_mot, coot_base;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(770 + seed);
    const Index m = 30 + static_cast<Index>(rng.next_u64() % 21);
    const Index n = 30 + static_cast<Index>(rng.next_u64() % 21);
    const Index d1 = 10 + static_cast<Index>(rng.next_u64() % 11);
    const Index d2 = 10 + static_cast<Index>(rng.next_u64() % 11);
    CootData data{rng.normal_matrix(m, d1), rng.normal_matrix(n, d2),
                  Marginal::uniform(d1), Marginal::uniform(d2)};
    const Marginal mu1 = Marginal::uniform(m);
    const Marginal mu2 = Marginal::uniform(n);
    const CootObjective obj(data, mu1, mu2);

    std::vector<Manifold> parts;
    parts.emplace_back(mu1, mu2);
    parts.emplace_back(data.nu1, data.nu2);
    const ProductManifold pm(std::move(parts));
    const Matrix g1 = mu1.vec() * mu2.vec().transpose();
    const Matrix g2 = data.nu1.vec() * data.nu2.vec().transpose();

    const SolveResult mot =
        solve_rcg(pm, obj, Point{Coupling{g1}, Coupling{g2}}, mot_cfg);
    if (!monotone(mot.trace))
      return {false, fmt("coot seed %llu: RCG trace not monotone",
                         static_cast<unsigned long long>(seed))};
    coot_mot.push_back(mot.final_cost());

    const SolveResult base = coot_am(data, mu1, mu2, g1, g2, base_cfg);
    coot_base.push_back(base.final_cost());
  }
  const double coot_med_mot = median(coot_mot);
  const double coot_med_base = median(coot_base);
  if (coot_med_mot > coot_med_base + 0.05 * std::abs(coot_med_base))
    return {false, fmt("coot medians: %.6f vs baseline %.6f", coot_med_mot,
                       coot_med_base)};

  const double t = total.elapsed();
  if (t >= 600.0) return {false, fmt("runtime %.1f s exceeds 10 min", t)};
  return {true,
          fmt("gw medians %.4f vs %.4f, coot medians %.4f vs %.4f, %.0f s",
              gw_med_mot, gw_med_base, coot_med_mot, coot_med_base, t)};
}

// --- criterion 8: masked block decomposition and trivial product ---
Outcome criterion_extensions() {
  Rng rng(808);

  double worst_block = 0.0;
  for (int instance = 0; instance < 3; ++instance) {
    // Two diagonal 2x2 blocks with matching masses on both sides.
    const double w = 0.35 + 0.3 * rng.uniform();
    Vector m1(4), m2(4);
    m1.segment(0, 2) = w * random_marginal(2, rng).vec();
    m1.segment(2, 2) = (1.0 - w) * random_marginal(2, rng).vec();
    m2.segment(0, 2) = w * random_marginal(2, rng).vec();
    m2.segment(2, 2) = (1.0 - w) * random_marginal(2, rng).vec();
    const Marginal mu1(m1 / m1.sum()), mu2(m2 / m2.sum());

    BoolArray pattern = BoolArray::Constant(4, 4, false);
    pattern.block(0, 0, 2, 2).setConstant(true);
    pattern.block(2, 2, 2, 2).setConstant(true);
    const Manifold masked(mu1, mu2, SupportMask(pattern));

    const Matrix target = rng.uniform_matrix(4, 4).array() + 0.1;
    SolverConfig cfg;
    cfg.max_iter = 50000;
    cfg.grad_tol = 1e-12;
    const SolveResult whole = solve_rcg(
        masked, SquaredDistanceObjective(target), masked.random_point(rng),
        cfg);

    for (int b = 0; b < 2; ++b) {
      const Index off = b == 0 ? 0 : 2;
      const double mass = b == 0 ? w : 1.0 - w;
      const Manifold block(Marginal(Vector(mu1.vec().segment(off, 2) / mass)),
                           Marginal(Vector(mu2.vec().segment(off, 2) / mass)));
      // The block of the masked problem is mass * gamma for a unit-mass
      // coupling gamma, so the per-block target rescales by the mass.
      const SolveResult part = solve_rcg(
          block,
          SquaredDistanceObjective(Matrix(target.block(off, off, 2, 2) / mass)),
          block.random_point(rng), cfg);
      const double gap = (whole.point[0].plan.block(off, off, 2, 2) -
                          mass * part.point[0].plan)
                             .cwiseAbs()
                             .maxCoeff();
      worst_block = std::max(worst_block, gap);
    }
  }
  if (worst_block > 1e-10)
    return {false, fmt("block decomposition gap %.3e exceeds 1e-10",
                       worst_block)};

  // k = 1 product wrapper: every operation must agree bit for bit.
  const Manifold man(random_marginal(3, rng), random_marginal(4, rng));
  const ProductManifold pm({man});
  Rng ra(11), rb(11);
  const Coupling g = man.random_point(ra);
  const Point px = pm.random_point(rb);
  double bit_gap = (g.plan - px[0].plan).cwiseAbs().maxCoeff();
  const Matrix z = rng.normal_matrix(3, 4);
  bit_gap = std::max(bit_gap, (man.project_tangent(g, z) -
                               pm.project_tangent(px, TangentList{z})[0])
                                  .cwiseAbs()
                                  .maxCoeff());
  bit_gap = std::max(bit_gap, (man.egrad_to_rgrad(g, z) -
                               pm.egrad_to_rgrad(px, TangentList{z})[0])
                                  .cwiseAbs()
                                  .maxCoeff());
  Matrix xi = man.random_tangent(g, rng);
  xi *= 5.0 / xi.cwiseQuotient(g.plan).cwiseAbs().maxCoeff();
  bit_gap = std::max(bit_gap, (man.retract(g, xi).plan -
                               pm.retract(px, TangentList{xi})[0].plan)
                                  .cwiseAbs()
                                  .maxCoeff());
  bit_gap = std::max(bit_gap,
                     std::abs(man.metric(g, xi, xi) -
                              pm.metric(px, TangentList{xi}, TangentList{xi})));
  if (bit_gap != 0.0)
    return {false, fmt("k=1 product deviates from the base manifold by %.3e",
                       bit_gap)};
  return {true, fmt("block decomposition gap %.2e, k=1 product bitwise "
                    "identical",
                    worst_block)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"geometry battery", criterion_geometry},
      {"gradient taylor order", criterion_taylor},
      {"hessian oracle", criterion_hessian},
      {"linear ot optimality", criterion_linear_ot},
      {"objective oracle equivalence", criterion_objective_oracles},
      {"sinkhorn scaling", criterion_sinkhorn},
      {"baseline head-to-head", criterion_head_to_head},
      {"masked and product extensions", criterion_extensions},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, fmt("threw: %s", e.what())};
    }
    if (!outcome.pass) ++failures;
    std::printf("criterion %zu [%s]: %s (%s)\n", i + 1, criteria[i].first,
                outcome.pass ? "PASS" : "FAIL", outcome.detail.c_str());
    std::fflush(stdout);
  }
  return failures;
}
