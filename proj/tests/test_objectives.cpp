#include <cmath>
#include <vector>

#include "doctest.h"
#include "mot/errors.hpp"
#include "mot/manifold.hpp"
#include "mot/objectives.hpp"
#include "mot/product_manifold.hpp"

using namespace mot;

namespace {

// Central finite difference of cost along an ambient direction, compared
// against the claimed Euclidean gradient.
double egrad_fd_error(const Objective& obj, const Point& x,
                      const std::vector<Matrix>& dir, double t = 1e-6) {
  Point plus = x, minus = x;
  for (std::size_t k = 0; k < x.size(); ++k) {
    plus[k].plan += t * dir[k];
    minus[k].plan -= t * dir[k];
  }
  const double fd = (obj.cost(plus) - obj.cost(minus)) / (2.0 * t);
  const std::vector<Matrix> g = obj.egrad(x);
  double analytic = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k)
    analytic += g[k].cwiseProduct(dir[k]).sum();
  return std::abs(fd - analytic) / std::max(1.0, std::abs(analytic));
}

Matrix swap_cost() {
  Matrix c(2, 2);
  c << 0, 1, 1, 0;
  return c;
}

}  // namespace

TEST_CASE("linear cost of the uniform product coupling under a swap cost") {
  const Manifold man(Marginal::uniform(2), Marginal::uniform(2));
  const Coupling g = man.product_coupling();
  const LinearObjective obj(swap_cost());
  CHECK(obj.cost1(g) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(LinearObjective(Matrix::Zero(2, 2)).cost1(g) == 0.0);
  CHECK((obj.egrad1(g) - swap_cost()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(obj.ehess1(g, swap_cost()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(obj.quadratic());
}

TEST_CASE("linear riemannian gradient ignores constant cost shifts") {
  Rng rng(31);
  const Manifold man(random_marginal(4, rng), random_marginal(5, rng));
  const Coupling g = man.random_point(rng);
  const Matrix c = rng.uniform_matrix(4, 5);
  const Matrix shifted = c.array() + 3.7;
  const Matrix a = man.egrad_to_rgrad(g, c);
  const Matrix b = man.egrad_to_rgrad(g, shifted);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("gw cost and gradient on the uniform 2x2 identity instance") {
  const Manifold man(Marginal::uniform(2), Marginal::uniform(2));
  const Coupling g = man.product_coupling();
  const GwObjective obj(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  CHECK(obj.cost1(g) == doctest::Approx(-0.25).epsilon(1e-14));
  CHECK((obj.egrad1(g) - Matrix::Constant(2, 2, -0.5)).cwiseAbs().maxCoeff() <=
        1e-15);
}

TEST_CASE("quadruple-loop gw references") {
  Rng rng(32);
  const auto squared = [](double a, double b) { return (a - b) * (a - b); };

  // Matching similarities evaluated along a diagonal coupling cancel exactly.
  const Matrix s = rng.normal_matrix(3, 3);
  const Matrix diag = (1.0 / 3.0) * Matrix::Identity(3, 3);
  CHECK(gw_reference_cost(diag, s, s, squared) == 0.0);

  const Matrix gamma = rng.uniform_matrix(3, 4);
  CHECK(gw_reference_cost(gamma, rng.normal_matrix(3, 3),
                          rng.normal_matrix(4, 4),
                          [](double, double) { return 0.0; }) == 0.0);

  CHECK_THROWS_AS(gw_reference_cost(Matrix::Ones(40, 40), Matrix::Ones(40, 40),
                                    Matrix::Ones(40, 40), squared),
                  ValidationError);
}

TEST_CASE("gw matrix form plus constants equals the quadruple loop") {
  const auto squared = [](double a, double b) { return (a - b) * (a - b); };
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    const Index m = 2 + static_cast<Index>(rng.next_u64() % 3);
    const Index n = 2 + static_cast<Index>(rng.next_u64() % 3);
    const Manifold man(random_marginal(m, rng), random_marginal(n, rng));
    // The constants assume exact marginals, so balance the sample tightly.
    const Coupling g = man.random_point(rng, 0.1, {1e-13, 20000, true});
    const Matrix s1 = rng.normal_matrix(m, m);
    const Matrix s2 = rng.normal_matrix(n, n);
    const GwObjective obj(s1, s2);
    const double fast = gw_squared_constants(s1, s2, man.mu1(), man.mu2()) +
                        2.0 * obj.cost1(g);
    const double reference = gw_reference_cost(g.plan, s1, s2, squared);
    CHECK(std::abs(fast - reference) <= 1e-10);
  }
}

TEST_CASE("gw gradient matches finite differences") {
  Rng rng(33);
  const Manifold man(random_marginal(4, rng), random_marginal(5, rng));
  const Point x{man.random_point(rng)};
  const GwObjective obj(rng.normal_matrix(4, 4), rng.normal_matrix(5, 5));
  for (int trial = 0; trial < 3; ++trial)
    CHECK(egrad_fd_error(obj, x, {rng.normal_matrix(4, 5)}) <= 1e-7);
}

TEST_CASE("coot cost vanishes when both couplings are diagonal matches") {
  Rng rng(34);
  const Matrix x = rng.normal_matrix(3, 2);
  const Matrix g1 = (1.0 / 3.0) * Matrix::Identity(3, 3);
  const Matrix g2 = 0.5 * Matrix::Identity(2, 2);
  CHECK(coot_reference_cost(g1, g2, x, x) == 0.0);
}

TEST_CASE("coot bilinear expansion equals the quadruple loop") {
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
    // The marginal-based constant requires tightly balanced couplings.
    const SinkhornConfig tight{1e-13, 20000, true};
    const Point x{sample_man.random_point(rng, 0.1, tight),
                  feature_man.random_point(rng, 0.1, tight)};
    const double reference =
        coot_reference_cost(x[0].plan, x[1].plan, data.x, data.z);
    CHECK(std::abs(obj.cost(x) - reference) <= 1e-10);
  }
}

TEST_CASE("coot gradients match finite differences in both blocks") {
  Rng rng(35);
  CootData data{rng.normal_matrix(4, 3), rng.normal_matrix(5, 2),
                random_marginal(3, rng), random_marginal(2, rng)};
  const Marginal mu1 = random_marginal(4, rng);
  const Marginal mu2 = random_marginal(5, rng);
  const CootObjective obj(data, mu1, mu2);
  const Manifold man1(mu1, mu2);
  const Manifold man2(data.nu1, data.nu2);
  const Point x{man1.random_point(rng), man2.random_point(rng)};
  for (int trial = 0; trial < 3; ++trial)
    CHECK(egrad_fd_error(obj, x,
                         {rng.normal_matrix(4, 5), rng.normal_matrix(3, 2)}) <=
          1e-7);
}

TEST_CASE("robust objective with one cost reduces to linear transport") {
  Rng rng(36);
  const Manifold man(random_marginal(3, rng), random_marginal(4, rng));
  const Coupling g = man.random_point(rng);
  const Matrix c = rng.uniform_matrix(3, 4);
  const LinearObjective linear(c);
  for (double tau : {0.0, 0.1}) {
    const RobustMaxObjective robust({c}, tau);
    CHECK(robust.cost1(g) == doctest::Approx(linear.cost1(g)).epsilon(1e-14));
    CHECK((robust.egrad1(g) - c).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("a uniformly dominated cost decides the hard maximum") {
  Rng rng(37);
  const Manifold man(random_marginal(3, rng), random_marginal(3, rng));
  const Coupling g = man.product_coupling();
  const Matrix c1 = rng.uniform_matrix(3, 3);
  const Matrix c2 = c1.array() + 1.0;
  const RobustMaxObjective obj({c1, c2}, 0.0);
  CHECK(obj.cost1(g) ==
        doctest::Approx(g.plan.cwiseProduct(c1).sum() + 1.0).epsilon(1e-12));
  CHECK((obj.egrad1(g) - c2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("softmax upper-bounds the hard maximum by at most tau log p") {
  Rng rng(38);
  const Manifold man(random_marginal(4, rng), random_marginal(4, rng));
  const Coupling g = man.random_point(rng);
  std::vector<Matrix> costs;
  for (int k = 0; k < 5; ++k) costs.push_back(rng.uniform_matrix(4, 4));
  const double hard = RobustMaxObjective(costs, 0.0).cost1(g);
  for (double tau : {1e-1, 1e-2, 1e-3}) {
    const double smooth = RobustMaxObjective(costs, tau).cost1(g);
    CHECK(smooth >= hard - 1e-14);
    CHECK(smooth - hard <= tau * std::log(double(costs.size())) + 1e-14);
  }
}

TEST_CASE("robust cost is invariant under reordering the cost set") {
  Rng rng(39);
  const Manifold man(random_marginal(3, rng), random_marginal(3, rng));
  const Coupling g = man.random_point(rng);
  std::vector<Matrix> costs{rng.uniform_matrix(3, 3), rng.uniform_matrix(3, 3),
                            rng.uniform_matrix(3, 3)};
  std::vector<Matrix> reversed{costs[2], costs[1], costs[0]};
  for (double tau : {0.0, 1e-2}) {
    const double a = RobustMaxObjective(costs, tau).cost1(g);
    const double b = RobustMaxObjective(reversed, tau).cost1(g);
    CHECK(a == doctest::Approx(b).epsilon(1e-14));
  }
}

TEST_CASE("hard-max ties resolve to the lowest index") {
  const Manifold man(Marginal::uniform(2), Marginal::uniform(2));
  const Coupling g = man.product_coupling();
  Matrix c1(2, 2), tie_shift(2, 2);
  c1 << 0.25, 0.75, 0.5, 1.0;  // dyadic entries keep both scores bit-identical
  tie_shift << 1, -1, -1, 1;   // zero inner product with the uniform coupling
  const Matrix c2 = c1 + tie_shift;
  const RobustMaxObjective forward({c1, c2}, 0.0);
  const RobustMaxObjective backward({c2, c1}, 0.0);
  CHECK(forward.cost1(g) == doctest::Approx(backward.cost1(g)).epsilon(1e-14));
  CHECK((forward.egrad1(g) - c1).cwiseAbs().maxCoeff() == 0.0);
  CHECK((backward.egrad1(g) - c2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("robust objective rejects degenerate configurations") {
  CHECK_THROWS_AS(RobustMaxObjective({}, 0.1), ValidationError);
  CHECK_THROWS_AS(RobustMaxObjective({Matrix::Ones(2, 2)}, -1.0),
                  ValidationError);
  CHECK_THROWS_AS(
      RobustMaxObjective({Matrix::Ones(2, 2), Matrix::Ones(2, 3)}, 0.1),
      ValidationError);
  const RobustMaxObjective hard({swap_cost()}, 0.0);
  CHECK(!hard.has_ehess());
  const Coupling g{Matrix::Constant(2, 2, 0.25)};
  CHECK_THROWS_AS(hard.ehess1(g, Matrix::Zero(2, 2)), ValidationError);
}

TEST_CASE("objectives validate arity and shapes") {
  const LinearObjective linear(swap_cost());
  const Coupling g{Matrix::Constant(2, 2, 0.25)};
  const Point two{g, g};
  CHECK_THROWS_AS(linear.cost(two), ValidationError);
  CHECK_THROWS_AS(linear.cost1(Coupling{Matrix::Constant(3, 2, 1.0 / 6)}),
                  ValidationError);
  CootData data{Matrix::Ones(2, 2), Matrix::Ones(2, 2), Marginal::uniform(2),
                Marginal::uniform(2)};
  const CootObjective coot(data, Marginal::uniform(2), Marginal::uniform(2));
  CHECK_THROWS_AS(coot.cost1(g), ValidationError);
}
