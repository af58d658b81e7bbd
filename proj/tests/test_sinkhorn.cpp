#include <cmath>

#include "doctest.h"
#include "mot/errors.hpp"
#include "mot/marginal.hpp"
#include "mot/sinkhorn.hpp"

using namespace mot;

namespace {

double marginal_residual(const Matrix& plan, const Marginal& mu1,
                         const Marginal& mu2) {
  const double row = (plan.rowwise().sum() - mu1.vec()).cwiseAbs().maxCoeff();
  const double col =
      (plan.colwise().sum().transpose() - mu2.vec()).cwiseAbs().maxCoeff();
  return std::max(row, col);
}

double entropy(const Matrix& plan) {
  double h = 0.0;
  for (Index i = 0; i < plan.rows(); ++i)
    for (Index j = 0; j < plan.cols(); ++j)
      if (plan(i, j) > 0.0) h -= plan(i, j) * std::log(plan(i, j));
  return h;
}

}  // namespace

TEST_CASE("all-ones kernel rebalances to the product coupling in one pass") {
  Rng rng(3);
  const Marginal mu1 = random_marginal(3, rng);
  const Marginal mu2 = random_marginal(4, rng);
  const SinkhornResult r =
      sinkhorn_scale(Matrix::Ones(3, 4), mu1, mu2, {1e-13, 100, false});
  const Matrix expect = mu1.vec() * mu2.vec().transpose();
  CHECK((r.plan - expect).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(r.iterations == 1);
}

TEST_CASE("symmetric 2x2 kernel has the closed-form fixed point") {
  Matrix k(2, 2);
  k << 2, 1, 1, 2;
  const Marginal u = Marginal::uniform(2);
  const SinkhornResult r = sinkhorn_scale(k, u, u, {1e-13, 10000, false});
  Matrix expect(2, 2);
  expect << 1.0 / 3, 1.0 / 6, 1.0 / 6, 1.0 / 3;
  CHECK((r.plan - expect).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("zero row is rejected before iterating") {
  Matrix k(2, 2);
  k << 0, 0, 1, 1;
  CHECK_THROWS_AS(sinkhorn_scale(k, Marginal::uniform(2), Marginal::uniform(2)),
                  ValidationError);
}

TEST_CASE("scaling invariance: c*K rebalances to the same coupling") {
  Rng rng(11);
  const Matrix k = rng.uniform_matrix(4, 5).array() + 0.1;
  const Marginal mu1 = random_marginal(4, rng);
  const Marginal mu2 = random_marginal(5, rng);
  const SinkhornConfig cfg{1e-12, 10000, false};
  const Matrix a = sinkhorn_scale(k, mu1, mu2, cfg).plan;
  const Matrix b = sinkhorn_scale(37.5 * k, mu1, mu2, cfg).plan;
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("log-domain agrees with linear domain on well-conditioned kernels") {
  Rng rng(12);
  for (int trial = 0; trial < 5; ++trial) {
    const Matrix k = rng.uniform_matrix(5, 3).array() * (1.0 - 1e-6) + 1e-6;
    const Marginal mu1 = random_marginal(5, rng);
    const Marginal mu2 = random_marginal(3, rng);
    const SinkhornConfig cfg{1e-12, 10000, false};
    const Matrix lin = sinkhorn_scale(k, mu1, mu2, cfg).plan;
    const Matrix log = sinkhorn_scale_log(k.array().log(), mu1, mu2, cfg).plan;
    CHECK((lin - log).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("log domain handles kernels spanning [e^-50, 1]") {
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
    CHECK(r.iterations <= 10000);
    CHECK(marginal_residual(r.plan, mu1, mu2) <= 1e-9);
  }
}

TEST_CASE("iteration cap raises a convergence error with the residual") {
  Rng rng(4);
  const Matrix k = rng.uniform_matrix(4, 4).array() + 0.01;
  const Marginal mu1 = random_marginal(4, rng);
  const Marginal mu2 = random_marginal(4, rng);
  CHECK_THROWS_AS(sinkhorn_scale(k, mu1, mu2, {1e-14, 1, false}),
                  SinkhornError);
  try {
    sinkhorn_scale(k, mu1, mu2, {1e-14, 1, false});
  } catch (const SinkhornError& e) {
    CHECK(e.residual() > 1e-14);
    CHECK(e.iterations() == 1);
  }
}

TEST_CASE("lmo of a zero gradient is the product coupling") {
  Rng rng(5);
  const Marginal mu1 = random_marginal(3, rng);
  const Marginal mu2 = random_marginal(5, rng);
  const Matrix plan = entropic_lmo(Matrix::Zero(3, 5), mu1, mu2, 0.5);
  CHECK((plan - mu1.vec() * mu2.vec().transpose()).cwiseAbs().maxCoeff() <=
        1e-9);
}

TEST_CASE("lmo of the 2x2 swap cost concentrates on the diagonal") {
  Matrix g(2, 2);
  g << 0, 1, 1, 0;
  const Marginal u = Marginal::uniform(2);
  const Matrix plan = entropic_lmo(g, u, u, 0.1, {1e-13, 20000, true});
  const double expect = 0.5 / (1.0 + std::exp(-10.0));
  CHECK(plan(0, 0) == doctest::Approx(expect).epsilon(1e-9));
  CHECK(plan(1, 1) == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("lmo is invariant to constant shifts of the gradient") {
  Rng rng(6);
  const Marginal mu1 = random_marginal(4, rng);
  const Marginal mu2 = random_marginal(3, rng);
  const Matrix g = rng.normal_matrix(4, 3);
  const SinkhornConfig cfg{1e-12, 20000, true};
  const Matrix a = entropic_lmo(g, mu1, mu2, 0.7, cfg);
  const Matrix b =
      entropic_lmo(g.array() + 4.2, mu1, mu2, 0.7, cfg);
  CHECK((a - b).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("lmo output entropy is nondecreasing in epsilon") {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const Marginal mu1 = random_marginal(4, rng);
    const Marginal mu2 = random_marginal(4, rng);
    const Matrix g = rng.normal_matrix(4, 4);
    double prev = -1e300;
    for (double eps : {0.01, 0.1, 1.0, 10.0}) {
      const double h =
          entropy(entropic_lmo(g, mu1, mu2, eps, {1e-12, 50000, true}));
      CHECK(h >= prev - 1e-10);
      prev = h;
    }
  }
}
