// Command-line front end: synthetic problem generation, solver runs with
// trace emission, and the geometry self-check battery.
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "mot/baselines.hpp"
#include "mot/diagnostics.hpp"
#include "mot/errors.hpp"
#include "mot/io.hpp"
#include "mot/manifold.hpp"
#include "mot/objectives.hpp"
#include "mot/product_manifold.hpp"
#include "mot/solvers.hpp"

namespace fs = std::filesystem;
using namespace mot;

namespace {

fs::path default_out_dir() {
  if (const char* env = std::getenv("MOT_OUT_DIR")) return fs::path(env);
  return fs::path(".");
}

struct SolveOptions {
  std::string problem;
  std::string solver;
  std::string mu1_path, mu2_path;
  std::string cost_path;               // linear
  std::vector<std::string> cost_paths; // robust
  std::string s1_path, s2_path;        // gw
  std::string x_path, z_path, nu1_path, nu2_path;  // coot
  std::string mask_path;
  double tau = 0.1;
  std::uint64_t seed = 0;
  int repeat = 1;
  int jobs = 1;
  std::string trace_path;
  std::string trace_clock = "wall";
  int max_iter = 500;
  double max_time = 0.0;  // 0 = no limit
  double grad_tol = 1e-6;
  std::string cg = "hs";
  double epsilon = 0.05;
  std::string fw_step = "harmonic";
  double sinkhorn_tol = 1e-9;
  int sinkhorn_max_iter = 10000;
  bool sinkhorn_linear = false;
};

// Everything shared between repeated runs of one spec (read-only after setup).
struct SolveSetup {
  std::vector<Manifold> manifolds;
  std::vector<Marginal> marginals;  // mu1, mu2 [, nu1, nu2]
  std::unique_ptr<Objective> objective;
  std::optional<CootData> coot;
};

SolveSetup build_setup(const SolveOptions& opt) {
  SolveSetup setup;
  const Marginal mu1 = read_marginal_csv(opt.mu1_path);
  const Marginal mu2 = read_marginal_csv(opt.mu2_path);
  setup.marginals.push_back(mu1);
  setup.marginals.push_back(mu2);

  const bool fw_like = opt.solver == "fw" || opt.solver == "fw1" ||
                       opt.solver == "am";
  if (!opt.mask_path.empty() && fw_like)
    throw ValidationError("--mask is not supported with solver " + opt.solver);
  if (opt.mask_path.empty()) {
    setup.manifolds.emplace_back(mu1, mu2);
  } else {
    setup.manifolds.emplace_back(mu1, mu2, read_mask(opt.mask_path));
  }

  auto expect_shape = [&](const Matrix& m, Index rows, Index cols,
                          const std::string& what) {
    if (m.rows() != rows || m.cols() != cols)
      throw ValidationError(what + " is " + std::to_string(m.rows()) + "x" +
                            std::to_string(m.cols()) + ", expected " +
                            std::to_string(rows) + "x" + std::to_string(cols));
  };

  if (opt.problem == "linear") {
    if (opt.cost_path.empty()) throw ValidationError("linear needs --cost");
    Matrix c = read_matrix_csv(opt.cost_path);
    expect_shape(c, mu1.size(), mu2.size(), "cost matrix");
    setup.objective = std::make_unique<LinearObjective>(std::move(c));
  } else if (opt.problem == "gw") {
    if (opt.s1_path.empty() || opt.s2_path.empty())
      throw ValidationError("gw needs --s1 and --s2");
    Matrix s1 = read_matrix_csv(opt.s1_path);
    Matrix s2 = read_matrix_csv(opt.s2_path);
    expect_shape(s1, mu1.size(), mu1.size(), "s1");
    expect_shape(s2, mu2.size(), mu2.size(), "s2");
    setup.objective = std::make_unique<GwObjective>(std::move(s1), std::move(s2));
  } else if (opt.problem == "robust") {
    if (opt.cost_paths.empty())
      throw ValidationError("robust needs at least one --cost");
    std::vector<Matrix> costs;
    for (const std::string& path : opt.cost_paths) {
      costs.push_back(read_matrix_csv(path));
      expect_shape(costs.back(), mu1.size(), mu2.size(), path);
    }
    setup.objective =
        std::make_unique<RobustMaxObjective>(std::move(costs), opt.tau);
  } else if (opt.problem == "coot") {
    if (opt.x_path.empty() || opt.z_path.empty() || opt.nu1_path.empty() ||
        opt.nu2_path.empty())
      throw ValidationError("coot needs --x, --z, --nu1 and --nu2");
    Matrix x = read_matrix_csv(opt.x_path);
    Matrix z = read_matrix_csv(opt.z_path);
    const Marginal nu1 = read_marginal_csv(opt.nu1_path);
    const Marginal nu2 = read_marginal_csv(opt.nu2_path);
    expect_shape(x, mu1.size(), nu1.size(), "x");
    expect_shape(z, mu2.size(), nu2.size(), "z");
    setup.marginals.push_back(nu1);
    setup.marginals.push_back(nu2);
    setup.manifolds.emplace_back(nu1, nu2);
    setup.coot = CootData{std::move(x), std::move(z), nu1, nu2};
    setup.objective = std::make_unique<CootObjective>(*setup.coot, mu1, mu2);
  } else {
    throw ValidationError("unknown problem '" + opt.problem + "'");
  }

  const bool arity1 = setup.objective->arity() == 1;
  if (opt.solver == "am" && opt.problem != "coot")
    throw ValidationError("solver am only applies to the coot problem");
  if ((opt.solver == "fw" || opt.solver == "fw1") && !arity1)
    throw ValidationError("solver " + opt.solver +
                          " needs a single-coupling problem, not " +
                          opt.problem);
  if (opt.solver == "rtr" && !setup.objective->has_ehess())
    throw ValidationError(
        "rtr needs an objective Hessian; robust with tau=0 has none");
  if (opt.solver != "rgd" && opt.solver != "rcg" && opt.solver != "rtr" &&
      opt.solver != "fw" && opt.solver != "fw1" && opt.solver != "am")
    throw ValidationError("unknown solver '" + opt.solver + "'");
  if (opt.trace_clock != "wall" && opt.trace_clock != "none")
    throw ValidationError("--trace-clock must be wall or none");
  if (opt.fw_step != "harmonic" && opt.fw_step != "fixed1" &&
      opt.fw_step != "exact")
    throw ValidationError("--fw-step must be harmonic, fixed1 or exact");
  if (opt.cg != "hs" && opt.cg != "fr")
    throw ValidationError("--cg must be hs or fr");
  return setup;
}

SolverConfig make_solver_config(const SolveOptions& opt) {
  SolverConfig config;
  config.max_iter = opt.max_iter;
  if (opt.max_time > 0.0) config.max_time_sec = opt.max_time;
  config.grad_tol = opt.grad_tol;
  config.cg_variant =
      opt.cg == "fr" ? CgVariant::kFletcherReeves : CgVariant::kHestenesStiefel;
  config.sinkhorn.tol = opt.sinkhorn_tol;
  config.sinkhorn.max_iter = opt.sinkhorn_max_iter;
  config.sinkhorn.log_domain = !opt.sinkhorn_linear;
  return config;
}

FwConfig make_fw_config(const SolveOptions& opt) {
  FwConfig config;
  config.epsilon = opt.epsilon;
  if (opt.solver == "fw1" || opt.fw_step == "fixed1")
    config.steps = FwStepRule::kFixedOne;
  else if (opt.fw_step == "exact")
    config.steps = FwStepRule::kExactQuadratic;
  config.max_iter = opt.max_iter;
  if (opt.max_time > 0.0) config.max_time_sec = opt.max_time;
  config.sinkhorn.tol = opt.sinkhorn_tol;
  config.sinkhorn.max_iter = opt.sinkhorn_max_iter;
  config.sinkhorn.log_domain = !opt.sinkhorn_linear;
  return config;
}

SolveResult dispatch_solve(const SolveOptions& opt, const SolveSetup& setup,
                           std::uint64_t seed) {
  Rng rng(seed);
  Point x0;
  for (const Manifold& m : setup.manifolds)
    x0.push_back(m.random_point(rng));

  if (opt.solver == "fw" || opt.solver == "fw1")
    return frank_wolfe(*setup.objective, setup.marginals[0], setup.marginals[1],
                       std::move(x0.front()), make_fw_config(opt));
  if (opt.solver == "am")
    return coot_am(*setup.coot, setup.marginals[0], setup.marginals[1],
                   std::move(x0[0].plan), std::move(x0[1].plan),
                   make_fw_config(opt));

  const ProductManifold manifold(setup.manifolds);
  const SolverConfig config = make_solver_config(opt);
  if (opt.solver == "rgd")
    return solve_rgd(manifold, *setup.objective, std::move(x0), config);
  if (opt.solver == "rcg")
    return solve_rcg(manifold, *setup.objective, std::move(x0), config);
  return solve_rtr(manifold, *setup.objective, std::move(x0), config);
}

fs::path trace_path_for_run(const SolveOptions& opt, std::uint64_t seed) {
  fs::path base = opt.trace_path.empty() ? default_out_dir() / "trace.csv"
                                         : fs::path(opt.trace_path);
  if (opt.repeat <= 1) return base;
  fs::path named = base;
  named.replace_filename(base.stem().string() + "_s" + std::to_string(seed) +
                         base.extension().string());
  return named;
}

int run_one(const SolveOptions& opt, const SolveSetup& setup,
            std::uint64_t seed, std::mutex& io_mutex) {
  SolveResult result;
  try {
    result = dispatch_solve(opt, setup, seed);
  } catch (const std::exception& e) {
    const std::lock_guard lock(io_mutex);
    std::cerr << "numerical failure (seed " << seed << "): " << e.what()
              << "\n";
    return 3;
  }

  if (opt.trace_clock == "none")
    for (TracePoint& p : result.trace) p.elapsed_sec = 0.0;

  const fs::path trace = trace_path_for_run(opt, seed);
  try {
    write_trace_csv(trace, result.trace);
  } catch (const std::exception& e) {
    const std::lock_guard lock(io_mutex);
    std::cerr << "trace write failed: " << e.what() << "\n";
    return 2;
  }

  const std::lock_guard lock(io_mutex);
  std::cout << "seed=" << seed << " final_cost=" << format_double(result.final_cost())
            << " status=" << to_string(result.status) << " trace=" << trace.string()
            << "\n";
  return 0;
}

int cmd_solve(const SolveOptions& opt) {
  std::optional<SolveSetup> setup;
  try {
    setup.emplace(build_setup(opt));
  } catch (const std::exception& e) {
    std::cerr << "setup error: " << e.what() << "\n";
    return 2;
  }

  std::mutex io_mutex;
  if (opt.repeat <= 1)
    return run_one(opt, *setup, opt.seed, io_mutex);

  std::atomic<int> next{0};
  std::atomic<int> worst{0};
  auto worker = [&] {
    while (true) {
      const int r = next.fetch_add(1);
      if (r >= opt.repeat) break;
      const int code = run_one(opt, *setup, opt.seed + static_cast<std::uint64_t>(r),
                               io_mutex);
      int cur = worst.load();
      while (code > cur && !worst.compare_exchange_weak(cur, code)) {
      }
    }
  };
  const int thread_count = std::max(1, std::min(opt.jobs, opt.repeat));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(thread_count));
  for (int i = 0; i < thread_count; ++i) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  return worst.load();
}

int cmd_gen(const std::string& kind, Index m, Index n, Index d1, Index d2,
            std::uint64_t seed, const std::string& out) {
  try {
    const fs::path dir = out.empty() ? default_out_dir() : fs::path(out);
    fs::create_directories(dir);
    Rng rng(seed);
    write_vector_csv(dir / "mu1.csv", random_marginal(m, rng).vec());
    write_vector_csv(dir / "mu2.csv", random_marginal(n, rng).vec());
    if (kind == "linear") {
      write_matrix_csv(dir / "cost.csv", rng.uniform_matrix(m, n));
    } else if (kind == "gw") {
      const Matrix a = rng.uniform_matrix(m, m);
      const Matrix b = rng.uniform_matrix(n, n);
      write_matrix_csv(dir / "s1.csv", (a + a.transpose()) / 2.0);
      write_matrix_csv(dir / "s2.csv", (b + b.transpose()) / 2.0);
    } else if (kind == "coot") {
      write_matrix_csv(dir / "x.csv", rng.uniform_matrix(m, d1));
      write_matrix_csv(dir / "z.csv", rng.uniform_matrix(n, d2));
      write_vector_csv(dir / "nu1.csv", random_marginal(d1, rng).vec());
      write_vector_csv(dir / "nu2.csv", random_marginal(d2, rng).vec());
    } else {
      std::cerr << "unknown kind '" << kind << "'\n";
      return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "generation failed: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int cmd_check(Index m, Index n, std::uint64_t seed, double hessian_fault) {
  CheckOptions options;
  options.rows = m;
  options.cols = n;
  options.seed = seed;
  options.hessian_fault = hessian_fault;
  const std::vector<PropertyCheck> checks = run_geometry_battery(options);

  std::cout << std::left << std::setw(30) << "property" << std::setw(8)
            << "status" << std::setw(14) << "measured" << std::setw(14)
            << "threshold"
            << "note\n";
  for (const PropertyCheck& c : checks) {
    std::cout << std::left << std::setw(30) << c.name << std::setw(8)
              << (c.skipped ? "SKIP" : c.pass ? "PASS" : "FAIL");
    if (c.skipped) {
      std::cout << std::setw(14) << "-" << std::setw(14) << "-";
    } else {
      std::ostringstream measured, threshold;
      measured << std::setprecision(3) << c.measured;
      threshold << (c.larger_is_better ? ">= " : "<= ") << c.threshold;
      std::cout << std::setw(14) << measured.str() << std::setw(14)
                << threshold.str();
    }
    std::cout << c.note << "\n";
  }
  return all_passed(checks) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Riemannian solvers for optimal transport couplings"};
  app.require_subcommand(1);

  SolveOptions opt;
  CLI::App* solve = app.add_subcommand("solve", "run a solver and write a trace");
  solve->add_option("--problem", opt.problem, "linear | gw | coot | robust")
      ->required();
  solve->add_option("--solver", opt.solver, "rgd | rcg | rtr | fw | fw1 | am")
      ->required();
  solve->add_option("--mu1", opt.mu1_path, "row marginal CSV")->required();
  solve->add_option("--mu2", opt.mu2_path, "column marginal CSV")->required();
  solve->add_option("--cost", opt.cost_path, "cost matrix CSV (linear)");
  solve->add_option("--costs", opt.cost_paths,
                    "cost matrix CSVs (robust, repeatable)");
  solve->add_option("--s1", opt.s1_path, "similarity CSV (gw)");
  solve->add_option("--s2", opt.s2_path, "similarity CSV (gw)");
  solve->add_option("--x", opt.x_path, "data matrix CSV (coot)");
  solve->add_option("--z", opt.z_path, "data matrix CSV (coot)");
  solve->add_option("--nu1", opt.nu1_path, "feature marginal CSV (coot)");
  solve->add_option("--nu2", opt.nu2_path, "feature marginal CSV (coot)");
  solve->add_option("--mask", opt.mask_path, "support mask (0/1 grid)");
  solve->add_option("--tau", opt.tau, "robust smoothing temperature");
  solve->add_option("--seed", opt.seed, "initial-point seed");
  solve->add_option("--repeat", opt.repeat, "number of seeds to run")
      ->check(CLI::PositiveNumber);
  solve->add_option("--jobs", opt.jobs, "parallel workers for --repeat")
      ->check(CLI::PositiveNumber);
  solve->add_option("--trace", opt.trace_path,
                    "trace CSV path (default: $MOT_OUT_DIR/trace.csv)");
  solve->add_option("--trace-clock", opt.trace_clock,
                    "wall | none (none writes 0 elapsed for reproducible bytes)");
  solve->add_option("--max-iter", opt.max_iter, "iteration cap");
  solve->add_option("--max-time", opt.max_time, "time cap in seconds");
  solve->add_option("--grad-tol", opt.grad_tol, "gradient norm tolerance");
  solve->add_option("--cg", opt.cg, "hs | fr");
  solve->add_option("--epsilon", opt.epsilon, "LMO entropy weight (fw/am)");
  solve->add_option("--fw-step", opt.fw_step, "harmonic | fixed1 | exact");
  solve->add_option("--sinkhorn-tol", opt.sinkhorn_tol, "rebalancing tolerance");
  solve->add_option("--sinkhorn-max-iter", opt.sinkhorn_max_iter,
                    "rebalancing sweep cap");
  solve->add_flag("--sinkhorn-linear", opt.sinkhorn_linear,
                  "linear-domain rebalancing (default log-domain)");

  std::string gen_kind;
  Index gen_m = 4, gen_n = 5, gen_d1 = 3, gen_d2 = 4;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic instance");
  gen->add_option("--kind", gen_kind, "linear | gw | coot")->required();
  gen->add_option("--m", gen_m, "rows")->check(CLI::PositiveNumber);
  gen->add_option("--n", gen_n, "columns")->check(CLI::PositiveNumber);
  gen->add_option("--d1", gen_d1, "features of x (coot)")
      ->check(CLI::PositiveNumber);
  gen->add_option("--d2", gen_d2, "features of z (coot)")
      ->check(CLI::PositiveNumber);
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output directory (default: $MOT_OUT_DIR)");

  Index check_m = 4, check_n = 5;
  std::uint64_t check_seed = 7;
  double check_fault = 0.0;
  CLI::App* check = app.add_subcommand("check", "run the geometry self-checks");
  check->add_option("--m", check_m, "rows")->check(CLI::PositiveNumber);
  check->add_option("--n", check_n, "columns")->check(CLI::PositiveNumber);
  check->add_option("--seed", check_seed, "battery seed");
  check->add_option("--hessian-fault", check_fault,
                    "relative Hessian perturbation (fault-injection demo)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (solve->parsed()) return cmd_solve(opt);
  if (gen->parsed())
    return cmd_gen(gen_kind, gen_m, gen_n, gen_d1, gen_d2, gen_seed, gen_out);
  return cmd_check(check_m, check_n, check_seed, check_fault);
}
