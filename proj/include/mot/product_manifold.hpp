// Cartesian products of coupling manifolds: tuple-valued points and tangents,
// summed metric, componentwise projection/retraction/gradient conversion.
#pragma once

#include <span>
#include <vector>

#include "mot/manifold.hpp"

namespace mot {

using Point = std::vector<Coupling>;
using TangentList = std::vector<Matrix>;

class ProductManifold {
 public:
  explicit ProductManifold(std::vector<Manifold> components);

  int arity() const { return static_cast<int>(components_.size()); }
  const Manifold& component(int i) const { return components_[i]; }

  // Total tangent dimension (sum over components).
  Index tangent_dim() const;

  void validate_point(std::span<const Coupling> x) const;
  void validate_tangent(std::span<const Matrix> xi) const;

  double metric(std::span<const Coupling> x, std::span<const Matrix> eta,
                std::span<const Matrix> xi) const;
  double norm(std::span<const Coupling> x, std::span<const Matrix> xi) const;

  TangentList project_tangent(std::span<const Coupling> x,
                              std::span<const Matrix> z,
                              const ProjectionConfig& config = {}) const;
  Point retract(std::span<const Coupling> x, std::span<const Matrix> xi,
                const SinkhornConfig& config = {},
                double exp_cap = kDefaultExpCap) const;
  TangentList egrad_to_rgrad(std::span<const Coupling> x,
                             std::span<const Matrix> egrad,
                             const ProjectionConfig& config = {}) const;
  TangentList ehess_to_rhess(std::span<const Coupling> x,
                             std::span<const Matrix> egrad,
                             std::span<const Matrix> ehess_xi,
                             std::span<const Matrix> xi,
                             const ProjectionConfig& config = {}) const;

  Point random_point(Rng& rng, double scale = 0.1,
                     const SinkhornConfig& config = {}) const;
  Point product_coupling(const SinkhornConfig& config = {}) const;
  TangentList random_tangent(std::span<const Coupling> x, Rng& rng,
                             const ProjectionConfig& config = {}) const;

 private:
  void check_arity(std::size_t got, const char* what) const;

  std::vector<Manifold> components_;
};

}  // namespace mot
