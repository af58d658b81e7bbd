// Objective functions over couplings (or tuples of couplings): linear OT,
// Gromov-Wasserstein in squared-Frobenius form, co-optimal transport, and
// robust (worst-case) OT over a finite cost set.
#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "mot/manifold.hpp"
#include "mot/marginal.hpp"
#include "mot/types.hpp"

namespace mot {

class Objective {
 public:
  virtual ~Objective() = default;

  // Number of couplings the objective consumes.
  virtual int arity() const = 0;
  virtual double cost(std::span<const Coupling> x) const = 0;
  virtual std::vector<Matrix> egrad(std::span<const Coupling> x) const = 0;

  // Euclidean Hessian action on an ambient direction tuple; must be linear in
  // the direction. Only meaningful when has_ehess().
  virtual bool has_ehess() const { return false; }
  virtual std::vector<Matrix> ehess(std::span<const Coupling> x,
                                    std::span<const Matrix> xi) const;

  // Polynomial of degree <= 2 in the couplings (enables exact 1-D line
  // search along convex combinations).
  virtual bool quadratic() const { return false; }

  // Single-coupling conveniences for arity-1 objectives.
  double cost1(const Coupling& g) const;
  Matrix egrad1(const Coupling& g) const;
  Matrix ehess1(const Coupling& g, const Matrix& xi) const;
};

// cost = <G, C>.
class LinearObjective final : public Objective {
 public:
  explicit LinearObjective(Matrix cost_matrix);
  int arity() const override { return 1; }
  double cost(std::span<const Coupling> x) const override;
  std::vector<Matrix> egrad(std::span<const Coupling> x) const override;
  bool has_ehess() const override { return true; }
  std::vector<Matrix> ehess(std::span<const Coupling> x,
                            std::span<const Matrix> xi) const override;
  bool quadratic() const override { return true; }
  const Matrix& cost_matrix() const { return c_; }

 private:
  Matrix c_;
};

// cost = -<G^T S1 G, S2>; the similarity matrices need not be symmetric.
class GwObjective final : public Objective {
 public:
  GwObjective(Matrix s1, Matrix s2);
  int arity() const override { return 1; }
  double cost(std::span<const Coupling> x) const override;
  std::vector<Matrix> egrad(std::span<const Coupling> x) const override;
  bool has_ehess() const override { return true; }
  std::vector<Matrix> ehess(std::span<const Coupling> x,
                            std::span<const Matrix> xi) const override;
  bool quadratic() const override { return true; }
  const Matrix& s1() const { return s1_; }
  const Matrix& s2() const { return s2_; }

 private:
  Matrix s1_, s2_;
};

// Sample/feature data for co-optimal transport: rows of x and z are samples,
// columns are features; nu1/nu2 are the feature marginals.
struct CootData {
  Matrix x;      // m x d1
  Matrix z;      // n x d2
  Marginal nu1;  // length d1
  Marginal nu2;  // length d2
};

// cost = sum_ijkl (x_ik - z_jl)^2 G1_ij G2_kl, evaluated through the bilinear
// expansion with constants taken from the marginals (exact on-manifold).
// Arity 2: G1 is m x n over (mu1, mu2), G2 is d1 x d2 over (nu1, nu2).
class CootObjective final : public Objective {
 public:
  CootObjective(CootData data, Marginal mu1, Marginal mu2);
  int arity() const override { return 2; }
  double cost(std::span<const Coupling> x) const override;
  std::vector<Matrix> egrad(std::span<const Coupling> x) const override;
  bool has_ehess() const override { return true; }
  std::vector<Matrix> ehess(std::span<const Coupling> x,
                            std::span<const Matrix> xi) const override;
  bool quadratic() const override { return true; }
  const CootData& data() const { return data_; }

 private:
  CootData data_;
  double constant_ = 0.0;
};

// Worst case over a finite set of cost matrices. temperature == 0 gives the
// hard max with a lowest-index subgradient; temperature > 0 gives the smooth
// softmax upper bound tau * log sum exp(<G,C_k>/tau).
class RobustMaxObjective final : public Objective {
 public:
  RobustMaxObjective(std::vector<Matrix> costs, double temperature);
  int arity() const override { return 1; }
  double cost(std::span<const Coupling> x) const override;
  std::vector<Matrix> egrad(std::span<const Coupling> x) const override;
  bool has_ehess() const override { return temperature_ > 0.0; }
  std::vector<Matrix> ehess(std::span<const Coupling> x,
                            std::span<const Matrix> xi) const override;
  double temperature() const { return temperature_; }

 private:
  Vector scores(const Matrix& plan) const;

  std::vector<Matrix> costs_;
  double temperature_;
};

// cost = ||G - target||_F^2; smooth with an interior optimum when the target
// is a coupling — handy for solver tests.
class SquaredDistanceObjective final : public Objective {
 public:
  explicit SquaredDistanceObjective(Matrix target);
  int arity() const override { return 1; }
  double cost(std::span<const Coupling> x) const override;
  std::vector<Matrix> egrad(std::span<const Coupling> x) const override;
  bool has_ehess() const override { return true; }
  std::vector<Matrix> ehess(std::span<const Coupling> x,
                            std::span<const Matrix> xi) const override;
  bool quadratic() const override { return true; }

 private:
  Matrix target_;
};

// --- reference (oracle) evaluators; O((mn)^2) loops, gated to small dims ---

// sum_ijkl loss(s1_ik, s2_jl) G_ij G_kl.
double gw_reference_cost(const Matrix& gamma, const Matrix& s1,
                         const Matrix& s2,
                         const std::function<double(double, double)>& loss);

// The two coupling-independent terms of the squared-loss expansion:
// sum s1_ik^2 mu1_i mu1_k + sum s2_jl^2 mu2_j mu2_l.
double gw_squared_constants(const Matrix& s1, const Matrix& s2,
                            const Marginal& mu1, const Marginal& mu2);

// sum_ijkl (x_ik - z_jl)^2 G1_ij G2_kl.
double coot_reference_cost(const Matrix& gamma1, const Matrix& gamma2,
                           const Matrix& x, const Matrix& z);

}  // namespace mot
