#include "mot/product_manifold.hpp"

#include <cmath>
#include <string>

#include "mot/errors.hpp"

namespace mot {

ProductManifold::ProductManifold(std::vector<Manifold> components)
    : components_(std::move(components)) {
  if (components_.empty())
    throw ValidationError("product manifold needs at least one component");
}

Index ProductManifold::tangent_dim() const {
  Index total = 0;
  for (const Manifold& m : components_) total += m.tangent_dim();
  return total;
}

void ProductManifold::check_arity(std::size_t got, const char* what) const {
  if (got != components_.size())
    throw ValidationError(std::string(what) + " has arity " +
                          std::to_string(got) + ", manifold product has " +
                          std::to_string(components_.size()));
}

void ProductManifold::validate_point(std::span<const Coupling> x) const {
  check_arity(x.size(), "point");
  for (int i = 0; i < arity(); ++i) components_[i].validate_coupling(x[i].plan);
}

void ProductManifold::validate_tangent(std::span<const Matrix> xi) const {
  check_arity(xi.size(), "tangent");
  for (int i = 0; i < arity(); ++i) components_[i].validate_tangent(xi[i]);
}

double ProductManifold::metric(std::span<const Coupling> x,
                               std::span<const Matrix> eta,
                               std::span<const Matrix> xi) const {
  check_arity(x.size(), "point");
  check_arity(eta.size(), "tangent");
  check_arity(xi.size(), "tangent");
  double acc = 0.0;
  for (int i = 0; i < arity(); ++i)
    acc += components_[i].metric(x[i], eta[i], xi[i]);
  return acc;
}

double ProductManifold::norm(std::span<const Coupling> x,
                             std::span<const Matrix> xi) const {
  return std::sqrt(metric(x, xi, xi));
}

TangentList ProductManifold::project_tangent(
    std::span<const Coupling> x, std::span<const Matrix> z,
    const ProjectionConfig& config) const {
  check_arity(x.size(), "point");
  check_arity(z.size(), "projection input");
  TangentList out;
  out.reserve(components_.size());
  for (int i = 0; i < arity(); ++i)
    out.push_back(components_[i].project_tangent(x[i], z[i], config));
  return out;
}

Point ProductManifold::retract(std::span<const Coupling> x,
                               std::span<const Matrix> xi,
                               const SinkhornConfig& config,
                               double exp_cap) const {
  check_arity(x.size(), "point");
  check_arity(xi.size(), "tangent");
  Point out;
  out.reserve(components_.size());
  for (int i = 0; i < arity(); ++i)
    out.push_back(components_[i].retract(x[i], xi[i], config, exp_cap));
  return out;
}

TangentList ProductManifold::egrad_to_rgrad(std::span<const Coupling> x,
                                            std::span<const Matrix> egrad,
                                            const ProjectionConfig& config) const {
  check_arity(x.size(), "point");
  check_arity(egrad.size(), "euclidean gradient");
  TangentList out;
  out.reserve(components_.size());
  for (int i = 0; i < arity(); ++i)
    out.push_back(components_[i].egrad_to_rgrad(x[i], egrad[i], config));
  return out;
}

TangentList ProductManifold::ehess_to_rhess(std::span<const Coupling> x,
                                            std::span<const Matrix> egrad,
                                            std::span<const Matrix> ehess_xi,
                                            std::span<const Matrix> xi,
                                            const ProjectionConfig& config) const {
  check_arity(x.size(), "point");
  check_arity(egrad.size(), "euclidean gradient");
  check_arity(ehess_xi.size(), "euclidean hessian action");
  check_arity(xi.size(), "tangent");
  TangentList out;
  out.reserve(components_.size());
  for (int i = 0; i < arity(); ++i)
    out.push_back(
        components_[i].ehess_to_rhess(x[i], egrad[i], ehess_xi[i], xi[i], config));
  return out;
}

Point ProductManifold::random_point(Rng& rng, double scale,
                                    const SinkhornConfig& config) const {
  Point out;
  out.reserve(components_.size());
  for (const Manifold& m : components_)
    out.push_back(m.random_point(rng, scale, config));
  return out;
}

Point ProductManifold::product_coupling(const SinkhornConfig& config) const {
  Point out;
  out.reserve(components_.size());
  for (const Manifold& m : components_) out.push_back(m.product_coupling(config));
  return out;
}

TangentList ProductManifold::random_tangent(std::span<const Coupling> x,
                                            Rng& rng,
                                            const ProjectionConfig& config) const {
  check_arity(x.size(), "point");
  TangentList out;
  out.reserve(components_.size());
  for (int i = 0; i < arity(); ++i)
    out.push_back(components_[i].random_tangent(x[i], rng, config));
  return out;
}

}  // namespace mot
