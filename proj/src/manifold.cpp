#include "mot/manifold.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mot/errors.hpp"

namespace mot {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string entry_str(Index i, Index j) {
  return "(" + std::to_string(i) + ", " + std::to_string(j) + ")";
}

}  // namespace

Manifold::Manifold(Marginal mu1, Marginal mu2)
    : mu1_(std::move(mu1)), mu2_(std::move(mu2)) {
  const double s1 = mu1_.vec().sum();
  const double s2 = mu2_.vec().sum();
  if (std::abs(s1 - s2) > 1e-12)
    throw ValidationError("marginal masses differ: " + std::to_string(s1) +
                          " vs " + std::to_string(s2));
  init_components();
}

Manifold::Manifold(Marginal mu1, Marginal mu2, SupportMask mask)
    : mu1_(std::move(mu1)), mu2_(std::move(mu2)), mask_(std::move(mask)) {
  const double s1 = mu1_.vec().sum();
  const double s2 = mu2_.vec().sum();
  if (std::abs(s1 - s2) > 1e-12)
    throw ValidationError("marginal masses differ: " + std::to_string(s1) +
                          " vs " + std::to_string(s2));
  if (mask_->rows() != rows() || mask_->cols() != cols())
    throw ValidationError("mask shape does not match the marginals");
  const TotalSupportReport ts = total_support_check(*mask_);
  if (!ts.pass)
    throw ValidationError("mask fails total support at entry " +
                          entry_str(ts.bad_row, ts.bad_col));
  // The masked equality system must stay underdetermined, otherwise the
  // feasible set degenerates to isolated points with no tangent directions.
  if (mask_->allowed_count() <= rows() + cols() - 1)
    throw ValidationError(
        "mask rank check failed: " + std::to_string(mask_->allowed_count()) +
        " allowed entries, need more than " +
        std::to_string(rows() + cols() - 1));
  init_components();
}

void Manifold::init_components() {
  const Index m = rows();
  const Index n = cols();
  row_component_.assign(m, -1);
  col_component_.assign(n, -1);
  if (!mask_) {
    row_component_.assign(m, 0);
    col_component_.assign(n, 0);
    components_ = 1;
    return;
  }
  const BoolArray& allowed = mask_->array();
  int comp = 0;
  std::vector<Index> queue;
  for (Index start = 0; start < m; ++start) {
    if (row_component_[start] >= 0) continue;
    queue.clear();
    queue.push_back(start);  // rows stored as-is, columns offset by m
    row_component_[start] = comp;
    for (std::size_t qi = 0; qi < queue.size(); ++qi) {
      const Index v = queue[qi];
      if (v < m) {
        for (Index j = 0; j < n; ++j)
          if (allowed(v, j) && col_component_[j] < 0) {
            col_component_[j] = comp;
            queue.push_back(m + j);
          }
      } else {
        const Index j = v - m;
        for (Index i = 0; i < m; ++i)
          if (allowed(i, j) && row_component_[i] < 0) {
            row_component_[i] = comp;
            queue.push_back(i);
          }
      }
    }
    ++comp;
  }
  components_ = comp;
}

Index Manifold::tangent_dim() const {
  const Index allowed = mask_ ? mask_->allowed_count() : rows() * cols();
  return allowed - (rows() + cols() - components_);
}

void Manifold::check_shape(const Matrix& a, const char* what) const {
  if (a.rows() != rows() || a.cols() != cols())
    throw ValidationError(std::string(what) + " has shape " +
                          std::to_string(a.rows()) + "x" +
                          std::to_string(a.cols()) + ", manifold is " +
                          std::to_string(rows()) + "x" +
                          std::to_string(cols()));
}

Coupling Manifold::coupling(Matrix plan) const {
  validate_coupling(plan);
  return Coupling{std::move(plan)};
}

void Manifold::validate_coupling(const Matrix& plan, double marginal_tol) const {
  check_shape(plan, "coupling");
  for (Index i = 0; i < rows(); ++i)
    for (Index j = 0; j < cols(); ++j) {
      const double v = plan(i, j);
      if (mask_ && !mask_->allowed(i, j)) {
        if (v != 0.0)
          throw ValidationError("coupling entry " + entry_str(i, j) +
                                " must be exactly 0 off support");
      } else if (!(v > 0.0)) {
        throw ValidationError("coupling entry " + entry_str(i, j) +
                              " is not strictly positive");
      }
    }
  const Vector row_err = plan.rowwise().sum() - mu1_.vec();
  const Vector col_err = plan.colwise().sum().transpose() - mu2_.vec();
  if (row_err.cwiseAbs().maxCoeff() > marginal_tol)
    throw ValidationError("coupling row sums violate the marginal by " +
                          std::to_string(row_err.cwiseAbs().maxCoeff()));
  if (col_err.cwiseAbs().maxCoeff() > marginal_tol)
    throw ValidationError("coupling column sums violate the marginal by " +
                          std::to_string(col_err.cwiseAbs().maxCoeff()));
}

void Manifold::validate_tangent(const Matrix& xi, double sum_tol) const {
  check_shape(xi, "tangent");
  if (mask_) {
    for (Index i = 0; i < rows(); ++i)
      for (Index j = 0; j < cols(); ++j)
        if (!mask_->allowed(i, j) && xi(i, j) != 0.0)
          throw ValidationError("tangent entry " + entry_str(i, j) +
                                " must be exactly 0 off support");
  }
  const double row_max = xi.rowwise().sum().cwiseAbs().maxCoeff();
  const double col_max = xi.colwise().sum().cwiseAbs().maxCoeff();
  if (row_max > sum_tol || col_max > sum_tol)
    throw ValidationError("tangent row/column sums are not zero (max " +
                          std::to_string(std::max(row_max, col_max)) + ")");
}

double Manifold::metric(const Coupling& gamma, const Matrix& eta,
                        const Matrix& xi) const {
  check_shape(gamma.plan, "coupling");
  check_shape(eta, "tangent");
  check_shape(xi, "tangent");
  if (!mask_ || mask_->is_full()) {
    if (!(gamma.plan.array() > 0.0).all())
      throw ValidationError("metric undefined at a boundary point");
    return (eta.array() * xi.array() / gamma.plan.array()).sum();
  }
  const BoolArray& allowed = mask_->array();
  double acc = 0.0;
  for (Index i = 0; i < rows(); ++i)
    for (Index j = 0; j < cols(); ++j) {
      if (!allowed(i, j)) continue;
      const double g = gamma.plan(i, j);
      if (!(g > 0.0))
        throw ValidationError("metric undefined at a boundary point");
      acc += eta(i, j) * xi(i, j) / g;
    }
  return acc;
}

double Manifold::norm(const Coupling& gamma, const Matrix& xi) const {
  return std::sqrt(metric(gamma, xi, xi));
}

// Solves the dual (Schur) system
//   (diag(mu2) - G^T diag(1/mu1) G) beta = (w^T 1 - col_extra)
//                                          - G^T ((w 1 - row_extra) ./ mu1)
// by Jacobi-preconditioned CG. The operator is PSD with null space spanned by
// the per-component column indicators; the right-hand side is made consistent
// by removing per-component means, and the returned beta is normalized to
// zero mean per component.
Vector Manifold::solve_dual_system(const Matrix& plan, const Matrix& w,
                                   const Vector& row_extra,
                                   const Vector& col_extra,
                                   const ProjectionConfig& config,
                                   int* iterations, double* residual) const {
  const Index n = cols();
  // Build the operator from the plan's actual row/column sums rather than the
  // nominal marginals: a retracted point satisfies the marginals only up to
  // the Sinkhorn tolerance, and that mismatch makes this singular system
  // inconsistent, which CG punishes by diverging along the null space.
  const Vector inv_row = plan.rowwise().sum().cwiseInverse();
  const Vector col_sums = plan.colwise().sum().transpose();
  const Vector row_rhs = w.rowwise().sum() - row_extra;
  Vector rhs = w.colwise().sum().transpose() - col_extra -
               plan.transpose() * row_rhs.cwiseProduct(inv_row);

  std::vector<double> comp_size(components_, 0.0);
  for (Index j = 0; j < n; ++j) comp_size[col_component_[j]] += 1.0;
  auto remove_component_means = [&](Vector& v) {
    std::vector<double> mean(components_, 0.0);
    for (Index j = 0; j < n; ++j) mean[col_component_[j]] += v[j];
    for (int c = 0; c < components_; ++c) mean[c] /= comp_size[c];
    for (Index j = 0; j < n; ++j) v[j] -= mean[col_component_[j]];
  };
  remove_component_means(rhs);

  auto apply = [&](const Vector& p) -> Vector {
    return col_sums.cwiseProduct(p) -
           plan.transpose() * (plan * p).cwiseProduct(inv_row);
  };

  Vector precond = col_sums - plan.cwiseProduct(plan).transpose() * inv_row;
  for (Index j = 0; j < n; ++j)
    if (!(precond[j] > 1e-300)) precond[j] = 1.0;

  const double stop = config.tol * std::max(1.0, rhs.cwiseAbs().maxCoeff());
  Vector beta = Vector::Zero(n);
  Vector r = rhs;
  int it = 0;
  double res = r.cwiseAbs().maxCoeff();
  if (res > stop) {
    Vector z = r.cwiseQuotient(precond);
    Vector p = z;
    double rz = r.dot(z);
    for (it = 1; it <= config.max_iter; ++it) {
      const Vector ap = apply(p);
      const double pap = p.dot(ap);
      if (!(pap > 0.0)) break;  // null-space direction; nothing left to gain
      const double step = rz / pap;
      beta += step * p;
      r -= step * ap;
      res = r.cwiseAbs().maxCoeff();
      if (res <= stop) {
        // Confirm against the true residual; the CG recursion can drift.
        r = rhs - apply(beta);
        res = r.cwiseAbs().maxCoeff();
        if (res <= stop) break;
      }
      z = r.cwiseQuotient(precond);
      const double rz_next = r.dot(z);
      p = z + (rz_next / rz) * p;
      rz = rz_next;
    }
    if (it > config.max_iter) it = config.max_iter;  // loop exhausted
  }
  if (iterations) *iterations = it;
  if (residual) *residual = res;
  if (res > stop)
    throw ProjectionError(
        "tangent projection solver stalled at residual " + std::to_string(res),
        res, it);
  remove_component_means(beta);
  return beta;
}

ProjectionDetail Manifold::project_tangent_detail(
    const Coupling& gamma, const Matrix& z,
    const ProjectionConfig& config) const {
  check_shape(gamma.plan, "coupling");
  check_shape(z, "projection input");
  const Matrix& plan = gamma.plan;

  Matrix zm;
  if (mask_) {
    zm = Matrix::Zero(rows(), cols());
    const BoolArray& allowed = mask_->array();
    for (Index i = 0; i < rows(); ++i)
      for (Index j = 0; j < cols(); ++j)
        if (allowed(i, j)) zm(i, j) = z(i, j);
  } else {
    zm = z;
  }

  ProjectionDetail detail;
  detail.beta = solve_dual_system(plan, zm, Vector::Zero(rows()),
                                  Vector::Zero(cols()), config,
                                  &detail.iterations, &detail.residual);

  if (config.gauge == ProjectionGauge::kPinLastBeta) {
    // Shift each component's duals so that its last column entry is 0; the
    // assembled projection is unchanged (gauge freedom).
    std::vector<double> shift(components_, 0.0);
    for (Index j = 0; j < cols(); ++j) shift[col_component_[j]] = detail.beta[j];
    for (Index j = 0; j < cols(); ++j)
      detail.beta[j] -= shift[col_component_[j]];
  }

  detail.alpha = (zm.rowwise().sum() - plan * detail.beta)
                     .cwiseQuotient(plan.rowwise().sum());

  detail.tangent.resize(rows(), cols());
  if (mask_) {
    const BoolArray& allowed = mask_->array();
    for (Index i = 0; i < rows(); ++i)
      for (Index j = 0; j < cols(); ++j)
        detail.tangent(i, j) =
            allowed(i, j)
                ? zm(i, j) - (detail.alpha[i] + detail.beta[j]) * plan(i, j)
                : 0.0;
  } else {
    detail.tangent =
        zm - ((detail.alpha.replicate(1, cols()) +
               detail.beta.transpose().replicate(rows(), 1)).array() *
              plan.array())
                 .matrix();
  }
  return detail;
}

Matrix Manifold::project_tangent(const Coupling& gamma, const Matrix& z,
                                 const ProjectionConfig& config) const {
  return project_tangent_detail(gamma, z, config).tangent;
}

Matrix Manifold::tangent_over_plan(const Coupling& gamma,
                                   const Matrix& xi) const {
  check_shape(gamma.plan, "coupling");
  check_shape(xi, "tangent");
  if (!mask_) return xi.cwiseQuotient(gamma.plan);
  Matrix out = Matrix::Zero(rows(), cols());
  const BoolArray& allowed = mask_->array();
  for (Index i = 0; i < rows(); ++i)
    for (Index j = 0; j < cols(); ++j)
      if (allowed(i, j)) out(i, j) = xi(i, j) / gamma.plan(i, j);
  return out;
}

Coupling Manifold::retract(const Coupling& gamma, const Matrix& xi,
                           const SinkhornConfig& config, double exp_cap) const {
  const Matrix exponent = tangent_over_plan(gamma, xi);
  Index bi = 0, bj = 0;
  double worst = 0.0;
  for (Index i = 0; i < rows(); ++i)
    for (Index j = 0; j < cols(); ++j)
      if (std::abs(exponent(i, j)) > std::abs(worst)) {
        worst = exponent(i, j);
        bi = i;
        bj = j;
      }
  if (std::abs(worst) > exp_cap)
    throw StepRejectedError("retraction exponent " + std::to_string(worst) +
                                " at entry " + entry_str(bi, bj) +
                                " exceeds the cap " + std::to_string(exp_cap),
                            worst);

  Coupling out{Matrix()};
  if (config.log_domain) {
    Matrix log_kernel(rows(), cols());
    for (Index i = 0; i < rows(); ++i)
      for (Index j = 0; j < cols(); ++j)
        log_kernel(i, j) = (mask_ && !mask_->allowed(i, j))
                               ? -kInf
                               : std::log(gamma.plan(i, j)) + exponent(i, j);
    out.plan = sinkhorn_scale_log(log_kernel, mu1_, mu2_, config).plan;
  } else {
    Matrix kernel = gamma.plan.cwiseProduct(exponent.array().exp().matrix());
    if (mask_) {
      const BoolArray& allowed = mask_->array();
      for (Index i = 0; i < rows(); ++i)
        for (Index j = 0; j < cols(); ++j)
          if (!allowed(i, j)) kernel(i, j) = 0.0;
    }
    out.plan = sinkhorn_scale(kernel, mu1_, mu2_, config).plan;
  }
  // The retraction must land in the strict interior; a supported entry can
  // still underflow to zero when the starting point is already extreme.
  for (Index i = 0; i < rows(); ++i)
    for (Index j = 0; j < cols(); ++j)
      if ((!mask_ || mask_->allowed(i, j)) && !(out.plan(i, j) > 0.0))
        throw StepRejectedError("retraction underflowed to zero at entry " +
                                    entry_str(i, j),
                                exponent(i, j));
  return out;
}

Matrix Manifold::egrad_to_rgrad(const Coupling& gamma, const Matrix& egrad,
                                const ProjectionConfig& config) const {
  check_shape(egrad, "euclidean gradient");
  return project_tangent(gamma, gamma.plan.cwiseProduct(egrad), config);
}

Matrix Manifold::dgrad_directional(const Coupling& gamma, const Matrix& egrad,
                                   const Matrix& ehess_xi, const Matrix& xi,
                                   const ProjectionConfig& config) const {
  check_shape(egrad, "euclidean gradient");
  check_shape(ehess_xi, "euclidean hessian action");
  check_shape(xi, "tangent");
  const Matrix& plan = gamma.plan;

  // Duals of the gradient's projection, zero-mean gauge: the assembled
  // derivative is gauge-invariant for tangent xi.
  ProjectionConfig zero_mean = config;
  zero_mean.gauge = ProjectionGauge::kZeroMeanBeta;
  const Matrix y = plan.cwiseProduct(egrad);
  const Vector beta =
      solve_dual_system(plan, y, Vector::Zero(rows()), Vector::Zero(cols()),
                        zero_mean, nullptr, nullptr);
  const Vector alpha =
      (y.rowwise().sum() - plan * beta).cwiseQuotient(plan.rowwise().sum());

  // Derivative of the dual system along xi.
  const Matrix w = xi.cwiseProduct(egrad) + plan.cwiseProduct(ehess_xi);
  const Vector row_extra = xi * beta;
  const Vector col_extra = xi.transpose() * alpha;
  const Vector dbeta = solve_dual_system(plan, w, row_extra, col_extra,
                                         zero_mean, nullptr, nullptr);
  const Vector dalpha = (w.rowwise().sum() - row_extra - plan * dbeta)
                            .cwiseQuotient(plan.rowwise().sum());

  Matrix dgrad(rows(), cols());
  for (Index i = 0; i < rows(); ++i)
    for (Index j = 0; j < cols(); ++j) {
      if (mask_ && !mask_->allowed(i, j)) {
        dgrad(i, j) = 0.0;
        continue;
      }
      dgrad(i, j) = w(i, j) - (dalpha[i] + dbeta[j]) * plan(i, j) -
                    (alpha[i] + beta[j]) * xi(i, j);
    }
  return dgrad;
}

Matrix Manifold::ehess_to_rhess(const Coupling& gamma, const Matrix& egrad,
                                const Matrix& ehess_xi, const Matrix& xi,
                                const ProjectionConfig& config) const {
  const Matrix dgrad = dgrad_directional(gamma, egrad, ehess_xi, xi, config);
  const Matrix grad = egrad_to_rgrad(gamma, egrad, config);
  const Matrix correction =
      dgrad - 0.5 * grad.cwiseProduct(tangent_over_plan(gamma, xi));
  return project_tangent(gamma, correction, config);
}

Coupling Manifold::random_point(Rng& rng, double scale,
                                const SinkhornConfig& config) const {
  const Matrix g = scale * rng.normal_matrix(rows(), cols());
  if (config.log_domain) {
    Matrix log_kernel = g;
    if (mask_) {
      const BoolArray& allowed = mask_->array();
      for (Index i = 0; i < rows(); ++i)
        for (Index j = 0; j < cols(); ++j)
          if (!allowed(i, j)) log_kernel(i, j) = -kInf;
    }
    return Coupling{sinkhorn_scale_log(log_kernel, mu1_, mu2_, config).plan};
  }
  Matrix kernel = g.array().exp();
  if (mask_) {
    const BoolArray& allowed = mask_->array();
    for (Index i = 0; i < rows(); ++i)
      for (Index j = 0; j < cols(); ++j)
        if (!allowed(i, j)) kernel(i, j) = 0.0;
  }
  return Coupling{sinkhorn_scale(kernel, mu1_, mu2_, config).plan};
}

Coupling Manifold::product_coupling(const SinkhornConfig& config) const {
  if (!mask_ || mask_->is_full())
    return Coupling{mu1_.vec() * mu2_.vec().transpose()};
  // Closest masked analogue: rebalance the 0/1 indicator kernel.
  if (config.log_domain) {
    Matrix log_kernel(rows(), cols());
    const BoolArray& allowed = mask_->array();
    for (Index i = 0; i < rows(); ++i)
      for (Index j = 0; j < cols(); ++j)
        log_kernel(i, j) = allowed(i, j) ? 0.0 : -kInf;
    return Coupling{sinkhorn_scale_log(log_kernel, mu1_, mu2_, config).plan};
  }
  return Coupling{sinkhorn_scale(mask_->indicator(), mu1_, mu2_, config).plan};
}

Matrix Manifold::random_tangent(const Coupling& gamma, Rng& rng,
                                const ProjectionConfig& config) const {
  return project_tangent(gamma, rng.normal_matrix(rows(), cols()), config);
}

}  // namespace mot
