#include "defi/ols.hpp"

#include <cmath>
#include <string>

#include "defi/errors.hpp"
#include "defi/prob.hpp"

namespace defi {

namespace {
constexpr double kRankThreshold = 1e-10;
}

OlsFit fit_ols(const Eigen::VectorXd& response, const Eigen::MatrixXd& design) {
  const long n = design.rows();
  const long k = design.cols();
  if (response.size() != n)
    throw ValidationError("response length " + std::to_string(response.size()) +
                          " does not match design rows " + std::to_string(n));
  if (k < 1) throw ValidationError("design has no columns");
  if (n <= k)
    throw ValidationError("need more rows than columns (n=" + std::to_string(n) +
                          ", cols=" + std::to_string(k) + ")");
  if (!response.allFinite() || !design.allFinite())
    throw ValidationError("non-finite values in least-squares inputs");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(kRankThreshold);
  const long rank = qr.rank();
  if (rank < k) throw RankError(rank, k);

  OlsFit fit;
  fit.coefficients = qr.solve(response);
  fit.residuals = response - design * fit.coefficients;
  fit.sigma_tilde_sq = fit.residuals.squaredNorm() / static_cast<double>(n - k);
  fit.projection_rank = rank;
  return fit;
}

namespace {

// Residual of v after projecting onto span(z); rank-deficient z is fine
// because the least-squares projection is still unique.
Eigen::VectorXd project_out(const Eigen::VectorXd& v, const Eigen::MatrixXd& z) {
  if (z.cols() == 0) return v;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
  qr.setThreshold(kRankThreshold);
  return v - z * qr.solve(v);
}

struct PartialParts {
  Eigen::VectorXd rx, ry;
  double rho;
};

PartialParts partial_parts(const Dataset& ds) {
  ds.validate();
  PartialParts parts;
  parts.rx = project_out(ds.x, ds.z);
  parts.ry = project_out(ds.y, ds.z);
  const double nx = parts.rx.norm();
  const double ny = parts.ry.norm();
  if (nx <= 1e-10 * std::max(ds.x.norm(), 1e-300))
    throw DegenerateResidualError("x lies in the column span of z");
  if (ny <= 1e-10 * std::max(ds.y.norm(), 1e-300))
    throw DegenerateResidualError("y lies in the column span of z");
  double rho = parts.rx.dot(parts.ry) / (nx * ny);
  if (rho > 1.0) rho = 1.0;
  if (rho < -1.0) rho = -1.0;
  parts.rho = rho;
  return parts;
}

TestResult t_ols_impl(const Dataset& ds, bool exact) {
  const long n = ds.n();
  const long p = ds.p();
  if (n <= p + 1)
    throw ValidationError("t-ols requires n > p + 1 (n=" + std::to_string(n) +
                          ", p=" + std::to_string(p) + ")");
  const PartialParts parts = partial_parts(ds);
  const double rho = parts.rho;
  const double one_minus = (1.0 - rho) * (1.0 + rho);
  if (one_minus <= 1e-30)
    throw NumericError("partial correlation is +-1; statistic is unbounded");
  const double df = static_cast<double>(n - p - 1);
  const double t = std::sqrt(df) * rho / std::sqrt(one_minus);

  TestResult res;
  res.method = exact ? "t-ols-exact" : "t-ols";
  res.statistic = t;
  res.p_value = exact ? prob::t_two_sided_p(t, df) : prob::normal_two_sided_p(t);
  res.diagnostics["rho"] = rho;
  res.diagnostics["df"] = df;
  res.diagnostics["theta_hat"] = rho * parts.ry.norm() / parts.rx.norm();
  return res;
}

}  // namespace

double partial_correlation(const Dataset& ds) { return partial_parts(ds).rho; }

TestResult t_ols(const Dataset& ds) { return t_ols_impl(ds, false); }

TestResult t_ols_exact(const Dataset& ds) { return t_ols_impl(ds, true); }

}  // namespace defi
