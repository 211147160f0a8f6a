#include "defi/glm.hpp"

#include <cmath>
#include <string>

#include "defi/errors.hpp"
#include "defi/ols.hpp"
#include "defi/prob.hpp"

namespace defi {

namespace {

double log_lik_sum(const GlmFamily& fam, const Eigen::VectorXd& eta,
                   const Eigen::VectorXd& y) {
  double ll = 0.0;
  for (long i = 0; i < y.size(); ++i) ll += fam.log_lik(eta[i], y[i]);
  return ll;
}

// Deviance is the optimization-progress measure: unlike the raw
// log-likelihood it stays at residual scale even when the means are huge
// (Poisson means ~1e8 push the log-likelihood to ~1e12, where float summation
// noise drowns any step-acceptance test).
double deviance_sum(const GlmFamily& fam, const Eigen::VectorXd& eta,
                    const Eigen::VectorXd& y) {
  double dev = 0.0;
  for (long i = 0; i < y.size(); ++i) dev += fam.unit_deviance(y[i], fam.mu(eta[i]));
  return dev;
}

Eigen::VectorXd init_coefficients(const Eigen::VectorXd& y, const Eigen::MatrixXd& d,
                                  const GlmFamily& fam) {
  switch (fam.tag()) {
    case FamilyTag::gaussian:
      return fit_ols(y, d).coefficients;
    case FamilyTag::binomial:
      return Eigen::VectorXd::Zero(d.cols());
    case FamilyTag::poisson: {
      const Eigen::VectorXd logy = (y.array() + 0.5).log();
      return fit_ols(logy, d).coefficients;
    }
  }
  return Eigen::VectorXd::Zero(d.cols());
}

}  // namespace

GlmFit fit_glm(const Eigen::VectorXd& y, const Eigen::MatrixXd& d, const GlmFamily& fam,
               const GlmOptions& opts) {
  const long n = d.rows();
  const long k = d.cols();
  if (y.size() != n)
    throw ValidationError("response length does not match design rows");
  if (n <= k) throw ValidationError("glm requires more rows than columns");
  if (!y.allFinite() || !d.allFinite())
    throw ValidationError("non-finite values in glm inputs");
  for (long i = 0; i < n; ++i)
    if (!fam.valid_response(y[i]))
      throw ValidationError(std::string("response value ") + std::to_string(y[i]) +
                            " is outside the support of the " + fam.name() + " family");
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d);
    qr.setThreshold(1e-10);
    if (qr.rank() < k) throw RankError(qr.rank(), k);
  }

  GlmFit fit;
  fit.family = fam;
  fit.coefficients = init_coefficients(y, d, fam);
  fit.eta = d * fit.coefficients;
  double dev = deviance_sum(fam, fit.eta, y);
  const double eta_lim = fam.eta_limit();
  // The score can only be driven to zero relative to problem scale: with
  // Poisson means near 1e8 the per-entry rounding floor of design'U is far
  // above any fixed absolute cutoff.
  double max_col = 0.0;
  for (long j = 0; j < k; ++j) max_col = std::max(max_col, d.col(j).norm());

  Eigen::VectorXd u(n), w(n);
  for (long iter = 1; iter <= opts.max_iter; ++iter) {
    fit.iterations = iter;
    for (long i = 0; i < n; ++i) {
      if (std::fabs(fit.eta[i]) > eta_lim) ++fit.clamp_events;
      u[i] = fam.score(fit.eta[i], y[i]);
      w[i] = -fam.score_deriv(fit.eta[i], y[i]);
      if (w[i] < 1e-10) w[i] = 1e-10;  // keep the Newton system well posed
    }
    const Eigen::VectorXd score = d.transpose() * u;
    fit.score_norm = score.lpNorm<Eigen::Infinity>();
    const double score_tol =
        opts.score_tol_per_n * (static_cast<double>(n) + max_col * u.norm());
    if (fit.score_norm <= score_tol) {
      // A binomial deviance at zero is a perfectly classified sample, which
      // only happens under separation: the true optimum is at infinity even
      // though the score already looks flat here.
      if (fam.tag() == FamilyTag::binomial && dev < 1e-6)
        throw SeparationError(
            "binomial deviance collapsed to zero; data are separated");
      fit.converged = true;
      fit.log_lik = log_lik_sum(fam, fit.eta, y);
      return fit;
    }

    const Eigen::MatrixXd h = d.transpose() * w.asDiagonal() * d;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() != Eigen::Success)
      throw SingularHessianError("observed information is singular at iteration " +
                                 std::to_string(iter));
    const Eigen::VectorXd delta = ldlt.solve(score);
    if (!delta.allFinite())
      throw SingularHessianError("newton step is not finite at iteration " +
                                 std::to_string(iter));

    // Step halving: accept the first step that does not increase the deviance
    // (up to rounding slack).
    const double slack = 1e-6 * (1.0 + dev);
    double step = 1.0;
    bool accepted = false;
    double dev_new = dev;
    for (int half = 0; half <= 10; ++half) {
      const Eigen::VectorXd cand = fit.coefficients + step * delta;
      const Eigen::VectorXd eta_cand = d * cand;
      const double dev_cand = deviance_sum(fam, eta_cand, y);
      if (dev_cand <= dev + slack) {
        fit.coefficients = cand;
        fit.eta = eta_cand;
        dev_new = dev_cand;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted)
      throw ConvergenceError("step halving failed to reduce the deviance at iteration " +
                             std::to_string(iter));
    if (fam.tag() == FamilyTag::binomial &&
        fit.coefficients.lpNorm<Eigen::Infinity>() > 30.0)
      throw SeparationError("logistic coefficients diverged (||beta||_inf > 30); "
                            "data are likely separated");
    // A full Newton step that moves the deviance by a rounding-level amount
    // means we are sitting at the optimum's numerical floor.
    if (step == 1.0 && std::fabs(dev - dev_new) <= 1e-9 * (1.0 + dev)) {
      // A binomial deviance at zero is a perfectly classified sample, which
      // only happens when the data are separated and the true optimum is at
      // infinity; the coefficient norm alone may still look moderate here.
      if (fam.tag() == FamilyTag::binomial && dev_new < 1e-6)
        throw SeparationError(
            "binomial deviance collapsed to zero; data are separated");
      dev = dev_new;
      for (long i = 0; i < n; ++i) u[i] = fam.score(fit.eta[i], y[i]);
      fit.score_norm = (d.transpose() * u).lpNorm<Eigen::Infinity>();
      fit.converged = true;
      fit.log_lik = log_lik_sum(fam, fit.eta, y);
      return fit;
    }
    dev = dev_new;
  }
  throw ConvergenceError("glm did not converge in " + std::to_string(opts.max_iter) +
                         " iterations (score norm " + std::to_string(fit.score_norm) + ")");
}

SandwichParts sandwich(const GlmFit& fit, const Eigen::MatrixXd& d,
                       const Eigen::VectorXd& y) {
  const long n = d.rows();
  const long k = d.cols();
  if (fit.eta.size() != n || y.size() != n)
    throw ValidationError("sandwich inputs do not match the fit");
  Eigen::VectorXd u2(n), wneg(n);
  for (long i = 0; i < n; ++i) {
    const double u = fit.family.score(fit.eta[i], y[i]);
    u2[i] = u * u;
    wneg[i] = -fit.family.score_deriv(fit.eta[i], y[i]);
  }
  SandwichParts parts;
  parts.v = d.transpose() * u2.asDiagonal() * d / static_cast<double>(n);
  parts.h = d.transpose() * wneg.asDiagonal() * d / static_cast<double>(n);
  parts.v = 0.5 * (parts.v + parts.v.transpose()).eval();
  parts.h = 0.5 * (parts.h + parts.h.transpose()).eval();
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(parts.h);
  if (!lu.isInvertible())
    throw SingularHessianError("H is singular; sandwich variance undefined");
  const Eigen::MatrixXd hinv = lu.inverse();
  parts.corrected_var_11 = (hinv * parts.v * hinv)(0, 0) / static_cast<double>(n);
  if (!(parts.corrected_var_11 > 0.0) || !std::isfinite(parts.corrected_var_11))
    throw SingularHessianError("sandwich variance is not positive");
  (void)k;
  return parts;
}

double correction_factor(const GlmFit& fit, const Eigen::VectorXd& y, CorrectionMode mode,
                         const Eigen::VectorXd* exposure) {
  const long n = y.size();
  if (fit.eta.size() != n) throw ValidationError("response does not match the fit");
  Eigen::VectorXd eta = fit.eta;
  if (mode == CorrectionMode::nuisance_only) {
    if (exposure == nullptr)
      throw ValidationError("nuisance_only correction needs the exposure column");
    if (exposure->size() != n)
      throw ValidationError("exposure length does not match the fit");
    eta -= fit.coefficients[0] * (*exposure);
  }
  double sum_u2 = 0.0, sum_up = 0.0;
  for (long i = 0; i < n; ++i) {
    const double u = fit.family.score(eta[i], y[i]);
    sum_u2 += u * u;
    sum_up += fit.family.score_deriv(eta[i], y[i]);
  }
  if (!(std::fabs(sum_up) > 1e-12))
    throw SingularHessianError("curvature sum is numerically zero; correction undefined");
  return -sum_u2 / sum_up;
}

TestResult t_glm(const Dataset& ds, const GlmFamily& fam) {
  ds.validate();
  const long n = ds.n();
  const long p = ds.p();
  if (n <= p + 1)
    throw ValidationError("t-glm requires n > p + 1 (n=" + std::to_string(n) +
                          ", p=" + std::to_string(p) + ")");
  Eigen::MatrixXd d(n, p + 1);
  d.col(0) = ds.x;
  if (p > 0) d.rightCols(p) = ds.z;

  const GlmFit fit = fit_glm(ds.y, d, fam);
  const SandwichParts parts = sandwich(fit, d, ds.y);
  const double c = correction_factor(fit, ds.y);

  const Eigen::FullPivLU<Eigen::MatrixXd> lu(parts.h);
  const double hinv11 = lu.inverse()(0, 0);
  if (!(hinv11 > 0.0))
    throw SingularHessianError("(H^-1)_11 is not positive");
  const double theta = fit.coefficients[0];
  const double var_naive = hinv11 / static_cast<double>(n);
  const double var_corr = hinv11 * c / static_cast<double>(n);
  if (!(var_corr > 0.0))
    throw SingularHessianError("corrected variance is not positive");

  // Pearson dispersion for the quasi-likelihood comparison statistic.
  double pearson = 0.0;
  for (long i = 0; i < n; ++i) {
    const double m = fam.mu(fit.eta[i]);
    const double v = std::max(fam.variance(m), 1e-300);
    const double r = ds.y[i] - m;
    pearson += r * r / v;
  }
  const double dispersion = pearson / static_cast<double>(n - (p + 1));

  TestResult res;
  res.method = "t-glm";
  res.statistic = theta / std::sqrt(var_corr);
  res.p_value = prob::normal_two_sided_p(res.statistic);
  res.diagnostics["theta_hat"] = theta;
  res.diagnostics["naive_statistic"] = theta / std::sqrt(var_naive);
  res.diagnostics["quasi_statistic"] =
      theta / std::sqrt(var_naive * std::max(dispersion, 1e-300));
  res.diagnostics["sandwich_statistic"] = theta / std::sqrt(parts.corrected_var_11);
  res.diagnostics["correction_factor"] = c;
  res.diagnostics["dispersion"] = dispersion;
  res.diagnostics["iterations"] = static_cast<double>(fit.iterations);
  res.diagnostics["clamp_events"] = static_cast<double>(fit.clamp_events);
  res.diagnostics["score_norm"] = fit.score_norm;
  return res;
}

}  // namespace defi
