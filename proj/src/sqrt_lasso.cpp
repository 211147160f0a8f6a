#include "defi/sqrt_lasso.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "defi/errors.hpp"
#include "defi/kernels.hpp"
#include "defi/prob.hpp"

namespace defi {

double default_lambda(long n, long p, double a) {
  if (n < 1) throw ValidationError("default_lambda requires n >= 1");
  if (p < 2) throw ValidationError("default_lambda requires p >= 2");
  if (!(a > 1.0)) throw ValidationError("default_lambda requires A > 1");
  return a * std::sqrt(2.0 * std::log(static_cast<double>(p)) / static_cast<double>(n));
}

double quantile_lambda(long n, long p) {
  if (n < 1 || p < 2) throw ValidationError("quantile_lambda requires n >= 1, p >= 2");
  const double pd = static_cast<double>(p);
  // k - (L^4 + 2L^2) is increasing in k (L decreases), so bisect on k.
  auto excess = [pd](double k) {
    const double l = prob::normal_quantile(1.0 - k / pd);
    const double l2 = l * l;
    return k - (l2 * l2 + 2.0 * l2);
  };
  double lo = 1e-12 * pd, hi = 0.5 * pd - 1e-12 * pd;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (excess(mid) < 0.0 ? lo : hi) = mid;
  }
  const double l = prob::normal_quantile(1.0 - 0.5 * (lo + hi) / pd);
  return std::sqrt(2.0) * l / std::sqrt(static_cast<double>(n));
}

namespace {

double soft_threshold(double v, double thr) {
  if (v > thr) return v - thr;
  if (v < -thr) return v + thr;
  return 0.0;
}

}  // namespace

LassoFit solve_sqrt_lasso(const Eigen::VectorXd& y, const Eigen::MatrixXd& x, double lambda,
                          const SqrtLassoOptions& opts) {
  const long n = x.rows();
  const long p = x.cols();
  if (y.size() != n) throw ValidationError("response length does not match design rows");
  if (n < 1) throw ValidationError("empty design");
  if (!(lambda > 0.0) || !std::isfinite(lambda))
    throw ValidationError("lambda must be positive and finite");
  if (!y.allFinite() || !x.allFinite())
    throw ValidationError("non-finite values in square-root lasso inputs");

  Eigen::VectorXd weights;
  if (opts.penalty_weights != nullptr) {
    if (opts.penalty_weights->size() != p)
      throw ValidationError("penalty weight length does not match column count");
    if (!((opts.penalty_weights->array() >= 0.0).all()) ||
        !opts.penalty_weights->allFinite())
      throw ValidationError("penalty weights must be finite and nonnegative");
    weights = *opts.penalty_weights;
  } else {
    weights = Eigen::VectorXd::Ones(p);
  }

  const double sqrt_n = std::sqrt(static_cast<double>(n));
  LassoFit fit;
  fit.lambda = lambda;
  fit.penalty_weights = weights;
  if (opts.warm_start != nullptr) {
    if (opts.warm_start->size() != p)
      throw ValidationError("warm start length does not match column count");
    fit.coefficients = *opts.warm_start;
  } else {
    fit.coefficients = Eigen::VectorXd::Zero(p);
  }

  std::vector<double> colsq(p);
  std::vector<char> skip(p, 0);
  for (long j = 0; j < p; ++j) {
    colsq[j] = kernels::nrm2_sq(x.col(j).data(), n);
    if (colsq[j] <= 1e-20 * static_cast<double>(n)) {
      skip[j] = 1;
      fit.coefficients[j] = 0.0;
    }
  }

  fit.residuals = y;
  double* r = fit.residuals.data();
  for (long j = 0; j < p; ++j)
    if (fit.coefficients[j] != 0.0)
      kernels::axpy(-fit.coefficients[j], x.col(j).data(), r, n);

  const double sigma_floor = 1e-12 * y.norm() / sqrt_n;
  double sigma = std::sqrt(kernels::nrm2_sq(r, n)) / sqrt_n;
  if (sigma <= sigma_floor) {
    fit.sigma_hat = sigma;
    fit.degenerate = true;
    return fit;
  }

  double* b = fit.coefficients.data();
  std::vector<long> active;
  active.reserve(p);

  // One coordinate-descent pass over `cols`; returns max |delta b_j|.
  const auto sweep = [&](const std::vector<long>& cols, double penalty) {
    double max_change = 0.0;
    for (const long j : cols) {
      if (skip[j]) continue;
      const double* col = x.col(j).data();
      const double g = kernels::dot(col, r, n);
      const double u = b[j] + g / colsq[j];
      const double thr = static_cast<double>(n) * penalty * weights[j] / colsq[j];
      const double bn = soft_threshold(u, thr);
      const double delta = bn - b[j];
      if (delta != 0.0) {
        kernels::axpy(-delta, col, r, n);
        b[j] = bn;
        const double mag = std::fabs(delta);
        if (mag > max_change) max_change = mag;
      }
    }
    return max_change;
  };

  std::vector<long> all_cols(p);
  for (long j = 0; j < p; ++j) all_cols[j] = j;

  bool converged = false;
  for (long outer = 0; outer < opts.max_outer && !converged; ++outer) {
    const double penalty = lambda * sigma;
    // Inner CD at fixed penalty: active-set cycles with a full pass every
    // 10 sweeps; finish only once a *full* pass moves nothing.
    long inner = 0;
    for (;;) {
      const bool full = (inner % 10 == 0);
      double change;
      if (full) {
        change = sweep(all_cols, penalty);
        active.clear();
        for (long j = 0; j < p; ++j)
          if (b[j] != 0.0) active.push_back(j);
      } else {
        change = sweep(active, penalty);
      }
      ++inner;
      if (++fit.iterations > opts.max_sweeps)
        throw ConvergenceError("square-root lasso exceeded " +
                               std::to_string(opts.max_sweeps) + " coordinate sweeps");
      if (change < opts.coef_tol) {
        if (full) break;
        // Active set is stationary; confirm with an immediate full pass.
        const double full_change = sweep(all_cols, penalty);
        ++fit.iterations;
        active.clear();
        for (long j = 0; j < p; ++j)
          if (b[j] != 0.0) active.push_back(j);
        inner = 1;  // we just did a full pass
        if (full_change < opts.coef_tol) break;
      }
    }

    const double sigma_new = std::sqrt(kernels::nrm2_sq(r, n)) / sqrt_n;
    if (sigma_new <= sigma_floor) {
      fit.sigma_hat = sigma_new;
      fit.degenerate = true;
      return fit;
    }
    if (std::fabs(sigma_new - sigma) <= opts.sigma_rel_tol * sigma_new) converged = true;
    sigma = sigma_new;
  }
  if (!converged)
    throw ConvergenceError("square-root lasso sigma fixed point did not converge in " +
                           std::to_string(opts.max_outer) + " outer iterations");

  fit.sigma_hat = sigma;
  fit.kkt_slack = kkt_certificate(fit, x);
  return fit;
}

LassoFit solve_augmented(const Eigen::VectorXd& y, const Eigen::MatrixXd& a,
                         const Eigen::MatrixXd& b, double lambda,
                         const SqrtLassoOptions& opts) {
  if (a.rows() != b.rows())
    throw ValidationError("augmented design blocks have different row counts");
  Eigen::MatrixXd joined(a.rows(), a.cols() + b.cols());
  joined.leftCols(a.cols()) = a;
  joined.rightCols(b.cols()) = b;
  return solve_sqrt_lasso(y, joined, lambda, opts);
}

double kkt_certificate(const LassoFit& fit, const Eigen::MatrixXd& x) {
  const long n = x.rows();
  const long p = x.cols();
  if (fit.coefficients.size() != p || fit.residuals.size() != n)
    throw ValidationError("fit does not match design dimensions");
  if (fit.degenerate)
    throw DegenerateResidualError("degenerate fit: residual is numerically zero, "
                                  "KKT certificate undefined");
  const double rnorm = fit.residuals.norm();
  if (!(rnorm > 0.0))
    throw DegenerateResidualError("zero residual norm; KKT certificate undefined");
  const double denom = std::sqrt(static_cast<double>(n)) * rnorm;
  double worst = -std::numeric_limits<double>::infinity();
  for (long j = 0; j < p; ++j) {
    const double lam_j =
        fit.lambda * (fit.penalty_weights.size() == p ? fit.penalty_weights[j] : 1.0);
    const double g = kernels::dot(x.col(j).data(), fit.residuals.data(), n) / denom;
    const double bj = fit.coefficients[j];
    const double v = (bj != 0.0) ? std::fabs((bj > 0.0 ? g : -g) - lam_j) : std::fabs(g) - lam_j;
    if (v > worst) worst = v;
  }
  return worst;
}

double sqrt_lasso_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                            const Eigen::VectorXd& coef, double lambda,
                            const Eigen::VectorXd* penalty_weights) {
  if (coef.size() != x.cols())
    throw ValidationError("coefficient length does not match column count");
  const Eigen::VectorXd r = y - x * coef;
  double pen = 0.0;
  for (long j = 0; j < coef.size(); ++j) {
    const double w = penalty_weights != nullptr ? (*penalty_weights)[j] : 1.0;
    pen += w * std::fabs(coef[j]);
  }
  return r.norm() / std::sqrt(static_cast<double>(x.rows())) + lambda * pen;
}

}  // namespace defi
