#include "mot/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mot/errors.hpp"

namespace mot {
namespace {

constexpr Index kReferenceDimLimit = 32;

void check_arity(std::size_t got, int want, const char* what) {
  if (static_cast<int>(got) != want)
    throw ValidationError(std::string(what) + " expects " +
                          std::to_string(want) + " coupling(s), got " +
                          std::to_string(got));
}

void check_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError(std::string(what) + ": shape mismatch (" +
                          std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + " vs " +
                          std::to_string(b.rows()) + "x" +
                          std::to_string(b.cols()) + ")");
}

void check_reference_dims(Index a, Index b, const char* what) {
  if (a > kReferenceDimLimit || b > kReferenceDimLimit)
    throw ValidationError(std::string(what) +
                          " is a quadratic-size oracle, gated to dims <= " +
                          std::to_string(kReferenceDimLimit));
}

}  // namespace

std::vector<Matrix> Objective::ehess(std::span<const Coupling>,
                                     std::span<const Matrix>) const {
  throw ValidationError("objective does not provide a Hessian");
}

double Objective::cost1(const Coupling& g) const {
  return cost(std::span<const Coupling>(&g, 1));
}

Matrix Objective::egrad1(const Coupling& g) const {
  return egrad(std::span<const Coupling>(&g, 1))[0];
}

Matrix Objective::ehess1(const Coupling& g, const Matrix& xi) const {
  return ehess(std::span<const Coupling>(&g, 1),
               std::span<const Matrix>(&xi, 1))[0];
}

// ---------------------------------------------------------------- linear ---

LinearObjective::LinearObjective(Matrix cost_matrix)
    : c_(std::move(cost_matrix)) {
  if (!c_.allFinite())
    throw ValidationError("cost matrix must have finite entries");
}

double LinearObjective::cost(std::span<const Coupling> x) const {
  check_arity(x.size(), 1, "linear objective");
  check_same_shape(x[0].plan, c_, "linear objective");
  return x[0].plan.cwiseProduct(c_).sum();
}

std::vector<Matrix> LinearObjective::egrad(std::span<const Coupling> x) const {
  check_arity(x.size(), 1, "linear objective");
  check_same_shape(x[0].plan, c_, "linear objective");
  return {c_};
}

std::vector<Matrix> LinearObjective::ehess(std::span<const Coupling> x,
                                           std::span<const Matrix> xi) const {
  check_arity(x.size(), 1, "linear objective");
  check_arity(xi.size(), 1, "linear objective direction");
  return {Matrix::Zero(c_.rows(), c_.cols())};
}

// -------------------------------------------------------------------- gw ---

GwObjective::GwObjective(Matrix s1, Matrix s2)
    : s1_(std::move(s1)), s2_(std::move(s2)) {
  if (s1_.rows() != s1_.cols() || s2_.rows() != s2_.cols())
    throw ValidationError("similarity matrices must be square");
  if (!s1_.allFinite() || !s2_.allFinite())
    throw ValidationError("similarity matrices must have finite entries");
}

double GwObjective::cost(std::span<const Coupling> x) const {
  check_arity(x.size(), 1, "gw objective");
  const Matrix& g = x[0].plan;
  if (g.rows() != s1_.rows() || g.cols() != s2_.rows())
    throw ValidationError("gw objective: coupling shape does not match the "
                          "similarity matrices");
  return -((g.transpose() * s1_ * g).cwiseProduct(s2_)).sum();
}

std::vector<Matrix> GwObjective::egrad(std::span<const Coupling> x) const {
  check_arity(x.size(), 1, "gw objective");
  const Matrix& g = x[0].plan;
  return {-(s1_ * g * s2_.transpose() + s1_.transpose() * g * s2_)};
}

std::vector<Matrix> GwObjective::ehess(std::span<const Coupling> x,
                                       std::span<const Matrix> xi) const {
  check_arity(x.size(), 1, "gw objective");
  check_arity(xi.size(), 1, "gw objective direction");
  const Matrix& v = xi[0];
  return {-(s1_ * v * s2_.transpose() + s1_.transpose() * v * s2_)};
}

// ------------------------------------------------------------------ coot ---

CootObjective::CootObjective(CootData data, Marginal mu1, Marginal mu2)
    : data_(std::move(data)) {
  if (!data_.x.allFinite() || !data_.z.allFinite())
    throw ValidationError("coot data must have finite entries");
  if (data_.x.cols() != data_.nu1.size() || data_.z.cols() != data_.nu2.size())
    throw ValidationError("coot feature marginals do not match data widths");
  if (data_.x.rows() != mu1.size() || data_.z.rows() != mu2.size())
    throw ValidationError("coot sample marginals do not match data heights");
  // sum x_ik^2 mu1_i nu1_k + sum z_jl^2 mu2_j nu2_l; constant because both
  // couplings keep their marginals.
  constant_ =
      (data_.x.cwiseProduct(data_.x) * data_.nu1.vec()).dot(mu1.vec()) +
      (data_.z.cwiseProduct(data_.z) * data_.nu2.vec()).dot(mu2.vec());
}

double CootObjective::cost(std::span<const Coupling> x) const {
  check_arity(x.size(), 2, "coot objective");
  const Matrix& g1 = x[0].plan;
  const Matrix& g2 = x[1].plan;
  if (g1.rows() != data_.x.rows() || g1.cols() != data_.z.rows() ||
      g2.rows() != data_.x.cols() || g2.cols() != data_.z.cols())
    throw ValidationError("coot objective: coupling shapes do not match data");
  return constant_ -
         2.0 * data_.x.cwiseProduct(g1 * data_.z * g2.transpose()).sum();
}

std::vector<Matrix> CootObjective::egrad(std::span<const Coupling> x) const {
  check_arity(x.size(), 2, "coot objective");
  const Matrix& g1 = x[0].plan;
  const Matrix& g2 = x[1].plan;
  return {-2.0 * data_.x * g2 * data_.z.transpose(),
          -2.0 * data_.x.transpose() * g1 * data_.z};
}

std::vector<Matrix> CootObjective::ehess(std::span<const Coupling> x,
                                         std::span<const Matrix> xi) const {
  check_arity(x.size(), 2, "coot objective");
  check_arity(xi.size(), 2, "coot objective direction");
  return {-2.0 * data_.x * xi[1] * data_.z.transpose(),
          -2.0 * data_.x.transpose() * xi[0] * data_.z};
}

// ---------------------------------------------------------------- robust ---

RobustMaxObjective::RobustMaxObjective(std::vector<Matrix> costs,
                                       double temperature)
    : costs_(std::move(costs)), temperature_(temperature) {
  if (costs_.empty())
    throw ValidationError("robust objective needs a nonempty cost set");
  for (const Matrix& c : costs_) {
    if (!c.allFinite())
      throw ValidationError("cost matrices must have finite entries");
    check_same_shape(c, costs_.front(), "robust cost set");
  }
  if (!(temperature_ >= 0.0))
    throw ValidationError("temperature must be >= 0");
}

Vector RobustMaxObjective::scores(const Matrix& plan) const {
  check_same_shape(plan, costs_.front(), "robust objective");
  Vector s(static_cast<Index>(costs_.size()));
  for (std::size_t k = 0; k < costs_.size(); ++k)
    s[static_cast<Index>(k)] = plan.cwiseProduct(costs_[k]).sum();
  return s;
}

double RobustMaxObjective::cost(std::span<const Coupling> x) const {
  check_arity(x.size(), 1, "robust objective");
  const Vector s = scores(x[0].plan);
  const double mx = s.maxCoeff();
  if (temperature_ == 0.0) return mx;
  return temperature_ * (std::log(((s.array() - mx) / temperature_).exp().sum())) + mx;
}

std::vector<Matrix> RobustMaxObjective::egrad(std::span<const Coupling> x) const {
  check_arity(x.size(), 1, "robust objective");
  const Vector s = scores(x[0].plan);
  if (temperature_ == 0.0) {
    // Hard max: subgradient from the first maximizer (lowest index wins ties).
    Index best = 0;
    for (Index k = 1; k < s.size(); ++k)
      if (s[k] > s[best]) best = k;
    return {costs_[static_cast<std::size_t>(best)]};
  }
  const double mx = s.maxCoeff();
  Vector w = ((s.array() - mx) / temperature_).exp();
  w /= w.sum();
  Matrix g = Matrix::Zero(costs_.front().rows(), costs_.front().cols());
  for (std::size_t k = 0; k < costs_.size(); ++k)
    g += w[static_cast<Index>(k)] * costs_[k];
  return {g};
}

std::vector<Matrix> RobustMaxObjective::ehess(std::span<const Coupling> x,
                                              std::span<const Matrix> xi) const {
  check_arity(x.size(), 1, "robust objective");
  check_arity(xi.size(), 1, "robust objective direction");
  if (temperature_ == 0.0)
    throw ValidationError("hard-max robust objective has no Hessian");
  const Vector s = scores(x[0].plan);
  const double mx = s.maxCoeff();
  Vector w = ((s.array() - mx) / temperature_).exp();
  w /= w.sum();
  Vector dots(s.size());
  for (std::size_t k = 0; k < costs_.size(); ++k)
    dots[static_cast<Index>(k)] = xi[0].cwiseProduct(costs_[k]).sum();
  const double mean_dot = w.dot(dots);
  Matrix h = Matrix::Zero(costs_.front().rows(), costs_.front().cols());
  for (std::size_t k = 0; k < costs_.size(); ++k) {
    const Index ki = static_cast<Index>(k);
    h += (w[ki] * (dots[ki] - mean_dot) / temperature_) * costs_[k];
  }
  return {h};
}

// ----------------------------------------------------- squared distance ---

SquaredDistanceObjective::SquaredDistanceObjective(Matrix target)
    : target_(std::move(target)) {
  if (!target_.allFinite())
    throw ValidationError("target must have finite entries");
}

double SquaredDistanceObjective::cost(std::span<const Coupling> x) const {
  check_arity(x.size(), 1, "squared-distance objective");
  check_same_shape(x[0].plan, target_, "squared-distance objective");
  return (x[0].plan - target_).squaredNorm();
}

std::vector<Matrix> SquaredDistanceObjective::egrad(
    std::span<const Coupling> x) const {
  check_arity(x.size(), 1, "squared-distance objective");
  check_same_shape(x[0].plan, target_, "squared-distance objective");
  return {2.0 * (x[0].plan - target_)};
}

std::vector<Matrix> SquaredDistanceObjective::ehess(
    std::span<const Coupling> x, std::span<const Matrix> xi) const {
  check_arity(x.size(), 1, "squared-distance objective");
  check_arity(xi.size(), 1, "squared-distance direction");
  return {2.0 * xi[0]};
}

// ------------------------------------------------------------- references ---

double gw_reference_cost(const Matrix& gamma, const Matrix& s1,
                         const Matrix& s2,
                         const std::function<double(double, double)>& loss) {
  check_reference_dims(gamma.rows(), gamma.cols(), "gw_reference_cost");
  if (s1.rows() != gamma.rows() || s1.cols() != gamma.rows() ||
      s2.rows() != gamma.cols() || s2.cols() != gamma.cols())
    throw ValidationError("gw_reference_cost: inconsistent shapes");
  double acc = 0.0;
  for (Index i = 0; i < gamma.rows(); ++i)
    for (Index j = 0; j < gamma.cols(); ++j)
      for (Index k = 0; k < gamma.rows(); ++k)
        for (Index l = 0; l < gamma.cols(); ++l)
          acc += loss(s1(i, k), s2(j, l)) * gamma(i, j) * gamma(k, l);
  return acc;
}

double gw_squared_constants(const Matrix& s1, const Matrix& s2,
                            const Marginal& mu1, const Marginal& mu2) {
  if (s1.rows() != mu1.size() || s2.rows() != mu2.size())
    throw ValidationError("gw_squared_constants: inconsistent shapes");
  const double a =
      mu1.vec().dot(s1.cwiseProduct(s1) * mu1.vec());
  const double b =
      mu2.vec().dot(s2.cwiseProduct(s2) * mu2.vec());
  return a + b;
}

double coot_reference_cost(const Matrix& gamma1, const Matrix& gamma2,
                           const Matrix& x, const Matrix& z) {
  check_reference_dims(gamma1.rows(), gamma1.cols(), "coot_reference_cost");
  check_reference_dims(gamma2.rows(), gamma2.cols(), "coot_reference_cost");
  if (x.rows() != gamma1.rows() || z.rows() != gamma1.cols() ||
      x.cols() != gamma2.rows() || z.cols() != gamma2.cols())
    throw ValidationError("coot_reference_cost: inconsistent shapes");
  double acc = 0.0;
  for (Index i = 0; i < gamma1.rows(); ++i)
    for (Index j = 0; j < gamma1.cols(); ++j)
      for (Index k = 0; k < gamma2.rows(); ++k)
        for (Index l = 0; l < gamma2.cols(); ++l) {
          const double d = x(i, k) - z(j, l);
          acc += d * d * gamma1(i, j) * gamma2(k, l);
        }
  return acc;
}

}  // namespace mot
