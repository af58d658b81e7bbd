#include "mot/sinkhorn.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mot/errors.hpp"

namespace mot {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_shapes(const Matrix& kernel, const Marginal& mu1,
                  const Marginal& mu2) {
  if (kernel.rows() != mu1.size() || kernel.cols() != mu2.size())
    throw ValidationError(
        "kernel is " + std::to_string(kernel.rows()) + "x" +
        std::to_string(kernel.cols()) + " but marginals have sizes " +
        std::to_string(mu1.size()) + " and " + std::to_string(mu2.size()));
}

// out_i = log sum_j exp(log_kernel(i,j) + add_j); -inf entries contribute 0.
Vector lse_rows(const Matrix& log_kernel, const Vector& add) {
  const Index m = log_kernel.rows();
  const Index n = log_kernel.cols();
  Vector out(m);
  for (Index i = 0; i < m; ++i) {
    double mx = -kInf;
    for (Index j = 0; j < n; ++j) {
      const double v = log_kernel(i, j) + add[j];
      if (v > mx) mx = v;
    }
    if (mx == -kInf) {
      out[i] = -kInf;
      continue;
    }
    double s = 0.0;
    for (Index j = 0; j < n; ++j) {
      const double v = log_kernel(i, j) + add[j];
      if (v != -kInf) s += std::exp(v - mx);
    }
    out[i] = mx + std::log(s);
  }
  return out;
}

// out_j = log sum_i exp(log_kernel(i,j) + add_i).
Vector lse_cols(const Matrix& log_kernel, const Vector& add) {
  const Index m = log_kernel.rows();
  const Index n = log_kernel.cols();
  Vector out(n);
  for (Index j = 0; j < n; ++j) {
    double mx = -kInf;
    for (Index i = 0; i < m; ++i) {
      const double v = log_kernel(i, j) + add[i];
      if (v > mx) mx = v;
    }
    if (mx == -kInf) {
      out[j] = -kInf;
      continue;
    }
    double s = 0.0;
    for (Index i = 0; i < m; ++i) {
      const double v = log_kernel(i, j) + add[i];
      if (v != -kInf) s += std::exp(v - mx);
    }
    out[j] = mx + std::log(s);
  }
  return out;
}

SinkhornResult run_linear(const Matrix& kernel, const Marginal& mu1,
                          const Marginal& mu2, const SinkhornConfig& config) {
  const Index m = kernel.rows();
  const Index n = kernel.cols();
  Vector u(m);
  Vector v = Vector::Ones(n);
  Vector kv = kernel.rowwise().sum();
  u = mu1.vec().array() / kv.array();

  double residual = kInf;
  for (int it = 1; it <= config.max_iter; ++it) {
    v = mu2.vec().array() / (kernel.transpose() * u).array();
    kv.noalias() = kernel * v;
    residual = ((u.array() * kv.array()) - mu1.vec().array()).abs().maxCoeff();
    if (!std::isfinite(residual))
      throw SinkhornError(
          "linear-domain scaling produced non-finite factors; "
          "retry with log_domain",
          residual, it);
    if (residual <= config.tol) {
      SinkhornResult result;
      result.plan = u.asDiagonal() * kernel * v.asDiagonal();
      result.iterations = it;
      result.residual = residual;
      return result;
    }
    u = mu1.vec().array() / kv.array();
  }
  throw SinkhornError("sinkhorn did not reach tolerance " +
                          std::to_string(config.tol) + " within " +
                          std::to_string(config.max_iter) + " sweeps",
                      residual, config.max_iter);
}

SinkhornResult run_log(const Matrix& log_kernel, const Marginal& mu1,
                       const Marginal& mu2, const SinkhornConfig& config) {
  const Index m = log_kernel.rows();
  const Index n = log_kernel.cols();
  const Vector log_mu1 = mu1.vec().array().log();
  const Vector log_mu2 = mu2.vec().array().log();

  Vector f = log_mu1 - lse_rows(log_kernel, Vector::Zero(n));
  Vector g(n);

  double residual = kInf;
  for (int it = 1; it <= config.max_iter; ++it) {
    g = log_mu2 - lse_cols(log_kernel, f);
    const Vector row_lse = lse_rows(log_kernel, g);
    residual =
        ((f + row_lse).array().exp() - mu1.vec().array()).abs().maxCoeff();
    if (residual <= config.tol) {
      SinkhornResult result;
      result.plan.resize(m, n);
      for (Index i = 0; i < m; ++i)
        for (Index j = 0; j < n; ++j) {
          const double e = log_kernel(i, j);
          result.plan(i, j) = e == -kInf ? 0.0 : std::exp(f[i] + e + g[j]);
        }
      result.iterations = it;
      result.residual = residual;
      return result;
    }
    f = log_mu1 - row_lse;
  }
  throw SinkhornError("sinkhorn (log domain) did not reach tolerance " +
                          std::to_string(config.tol) + " within " +
                          std::to_string(config.max_iter) + " sweeps",
                      residual, config.max_iter);
}

}  // namespace

SinkhornResult sinkhorn_scale(const Matrix& kernel, const Marginal& mu1,
                              const Marginal& mu2,
                              const SinkhornConfig& config) {
  check_shapes(kernel, mu1, mu2);
  for (Index i = 0; i < kernel.rows(); ++i)
    for (Index j = 0; j < kernel.cols(); ++j) {
      const double k = kernel(i, j);
      if (!(k >= 0.0) || !std::isfinite(k))
        throw ValidationError("kernel entries must be finite and nonnegative");
    }
  for (Index i = 0; i < kernel.rows(); ++i)
    if (kernel.row(i).maxCoeff() <= 0.0)
      throw ValidationError("kernel row " + std::to_string(i) +
                            " is identically zero");
  for (Index j = 0; j < kernel.cols(); ++j)
    if (kernel.col(j).maxCoeff() <= 0.0)
      throw ValidationError("kernel column " + std::to_string(j) +
                            " is identically zero");

  if (config.log_domain)
    return run_log(kernel.array().log(), mu1, mu2, config);
  return run_linear(kernel, mu1, mu2, config);
}

SinkhornResult sinkhorn_scale_log(const Matrix& log_kernel, const Marginal& mu1,
                                  const Marginal& mu2,
                                  const SinkhornConfig& config) {
  check_shapes(log_kernel, mu1, mu2);
  for (Index i = 0; i < log_kernel.rows(); ++i)
    for (Index j = 0; j < log_kernel.cols(); ++j) {
      const double e = log_kernel(i, j);
      if (std::isnan(e) || e == kInf)
        throw ValidationError(
            "log kernel entries must be finite or -inf (excluded)");
    }
  for (Index i = 0; i < log_kernel.rows(); ++i)
    if (log_kernel.row(i).maxCoeff() == -kInf)
      throw ValidationError("log kernel row " + std::to_string(i) +
                            " is entirely excluded");
  for (Index j = 0; j < log_kernel.cols(); ++j)
    if (log_kernel.col(j).maxCoeff() == -kInf)
      throw ValidationError("log kernel column " + std::to_string(j) +
                            " is entirely excluded");
  return run_log(log_kernel, mu1, mu2, config);
}

Matrix entropic_lmo(const Matrix& grad, const Marginal& mu1,
                    const Marginal& mu2, double epsilon,
                    const SinkhornConfig& config) {
  check_shapes(grad, mu1, mu2);
  if (!(epsilon > 0.0) || !std::isfinite(epsilon))
    throw ValidationError("lmo temperature must be positive and finite");
  if (!grad.allFinite())
    throw ValidationError("lmo gradient must have finite entries");

  const Matrix log_kernel = -grad / epsilon;
  if (!config.log_domain) {
    const Matrix kernel = log_kernel.array().exp();
    // Underflow to an exact zero would silently change the support; fall back
    // to the log-domain loop in that case.
    if ((kernel.array() > 0.0).all())
      return sinkhorn_scale(
                 kernel, mu1, mu2,
                 SinkhornConfig{config.tol, config.max_iter, false})
          .plan;
  }
  return sinkhorn_scale_log(log_kernel, mu1, mu2, config).plan;
}

}  // namespace mot
