// Riemannian geometry of the interior of the transportation polytope
// M(mu1, mu2) = { G > 0 : G 1 = mu1, G^T 1 = mu2 }, optionally restricted to a
// sparsity pattern. Carries the Fisher information metric
// g_G(eta, xi) = sum_ij eta_ij xi_ij / G_ij.
#pragma once

#include <optional>

#include "mot/marginal.hpp"
#include "mot/sinkhorn.hpp"
#include "mot/support_mask.hpp"
#include "mot/types.hpp"

namespace mot {

// A point on the manifold: strictly positive plan (on the allowed support)
// whose row/column sums match the marginals. Validity is enforced at the
// manifold boundary (coupling()/validate_coupling), not per entry access.
struct Coupling {
  Matrix plan;
};

enum class ProjectionGauge {
  kPinLastBeta,   // last dual entry of each connected component fixed to 0
  kZeroMeanBeta,  // duals normalized to zero mean per connected component
};

struct ProjectionConfig {
  double tol = 1e-12;  // infinity-norm residual of the dual system
  int max_iter = 1000;
  ProjectionGauge gauge = ProjectionGauge::kPinLastBeta;
};

// Projection output together with the dual certificate (alpha, beta) solving
//   alpha .* mu1 + G beta   = Z 1
//   beta  .* mu2 + G^T alpha = Z^T 1.
struct ProjectionDetail {
  Matrix tangent;
  Vector alpha;
  Vector beta;
  int iterations = 0;
  double residual = 0.0;
};

inline constexpr double kDefaultExpCap = 30.0;

class Manifold {
 public:
  Manifold(Marginal mu1, Marginal mu2);
  Manifold(Marginal mu1, Marginal mu2, SupportMask mask);

  Index rows() const { return mu1_.size(); }
  Index cols() const { return mu2_.size(); }
  const Marginal& mu1() const { return mu1_; }
  const Marginal& mu2() const { return mu2_; }
  bool masked() const { return mask_.has_value(); }
  const SupportMask& mask() const { return *mask_; }
  // Connected components of the support's bipartite graph (1 when unmasked).
  int components() const { return components_; }
  // Dimension of the tangent space: allowed entries minus independent
  // marginal constraints, (m-1)(n-1) for full support.
  Index tangent_dim() const;

  // --- validation -----------------------------------------------------
  Coupling coupling(Matrix plan) const;  // validates and wraps
  void validate_coupling(const Matrix& plan, double marginal_tol = 1e-8) const;
  void validate_tangent(const Matrix& xi, double sum_tol = 1e-10) const;

  // --- metric ----------------------------------------------------------
  double metric(const Coupling& gamma, const Matrix& eta,
                const Matrix& xi) const;
  double norm(const Coupling& gamma, const Matrix& xi) const;

  // --- tangent projection ----------------------------------------------
  Matrix project_tangent(const Coupling& gamma, const Matrix& z,
                         const ProjectionConfig& config = {}) const;
  ProjectionDetail project_tangent_detail(const Coupling& gamma,
                                          const Matrix& z,
                                          const ProjectionConfig& config = {}) const;

  // --- retraction -------------------------------------------------------
  // Sinkhorn rebalancing of G .* exp(xi ./ G). Steps whose elementwise
  // exponent magnitude exceeds exp_cap are rejected (StepRejectedError) so
  // the caller can backtrack.
  Coupling retract(const Coupling& gamma, const Matrix& xi,
                   const SinkhornConfig& config = {},
                   double exp_cap = kDefaultExpCap) const;

  // --- derivative conversions -------------------------------------------
  // grad f = Proj_G(G .* egrad).
  Matrix egrad_to_rgrad(const Coupling& gamma, const Matrix& egrad,
                        const ProjectionConfig& config = {}) const;

  // Directional derivative of G |-> grad f(G) along tangent xi, given the
  // Euclidean gradient and ehess_xi = D egrad[xi]. Obtained by
  // differentiating the projection's dual system.
  Matrix dgrad_directional(const Coupling& gamma, const Matrix& egrad,
                           const Matrix& ehess_xi, const Matrix& xi,
                           const ProjectionConfig& config = {}) const;

  // Hess f[xi] = Proj_G(D grad f[xi] - 1/2 grad f .* xi ./ G).
  Matrix ehess_to_rhess(const Coupling& gamma, const Matrix& egrad,
                        const Matrix& ehess_xi, const Matrix& xi,
                        const ProjectionConfig& config = {}) const;

  // --- point/tangent generation ------------------------------------------
  // Sinkhorn(exp(scale * G)) with standard normal G; deterministic per rng.
  Coupling random_point(Rng& rng, double scale = 0.1,
                        const SinkhornConfig& config = {}) const;
  // mu1 mu2^T (exact); masked manifolds rebalance the 0/1 indicator instead.
  Coupling product_coupling(const SinkhornConfig& config = {}) const;
  Matrix random_tangent(const Coupling& gamma, Rng& rng,
                        const ProjectionConfig& config = {}) const;

  // Elementwise xi ./ G restricted to the support (exact zeros elsewhere).
  Matrix tangent_over_plan(const Coupling& gamma, const Matrix& xi) const;

 private:
  void init_components();
  Vector solve_dual_system(const Matrix& plan, const Matrix& w,
                           const Vector& row_extra, const Vector& col_extra,
                           const ProjectionConfig& config, int* iterations,
                           double* residual) const;
  void check_shape(const Matrix& a, const char* what) const;

  Marginal mu1_;
  Marginal mu2_;
  std::optional<SupportMask> mask_;
  std::vector<int> row_component_;
  std::vector<int> col_component_;
  int components_ = 1;
};

}  // namespace mot
