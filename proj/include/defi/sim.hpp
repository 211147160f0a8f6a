#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "defi/dataset.hpp"
#include "defi/rng.hpp"

namespace defi {

// A named data-generating process plus its shape parameters.  Tags:
//   example1-null, example1-alt      nonlinear y on a low-dimensional design
//   poisson-misspec                  poisson y with sigma-scaled misspecification
//   partial-linear-a|b|c             y = theta x + f(z, eps), three nuisances
//   logistic-hd-null, logistic-hd-alt  binary x and y, sparse logistic models
//   toeplitz-confint                 y = x - 0.5 z1 + 0.7 z2 + eps, theta = 1
// The design is Toeplitz(rho) Gaussian unless design_csv names a file whose
// rows (all-numeric CSV with header) are used instead, fixed across
// replicates.
struct Scenario {
  std::string tag;
  long n = 0;
  long p = 0;
  std::uint64_t seed = 0;
  double rho = 0.9;        // Toeplitz correlation of the synthetic design
  double sigma = 0.0;      // poisson-misspec strength
  std::string design_csv;  // optional fixed design source
};

// Scenario with the tag's default desk-scale shape filled in; unknown tag is
// a validation error.
Scenario make_scenario(const std::string& tag);

// n x p matrix with i.i.d. rows ~ N_p(0, Sigma), Sigma_jk = rho^|j-k|,
// generated by the AR(1) row recursion.
Eigen::MatrixXd toeplitz_gaussian(long n, long p, double rho, Rng& rng);

// All-numeric CSV (header row, comma separated) as a matrix.
Eigen::MatrixXd load_matrix_csv(const std::string& path);

// x = rowsum(z) + (Exp(1) - 1) noise; y = eta .* chi^2_1 draws where
// eta_i = sum_{j,k} logistic(z_ij z_ik) over all ordered pairs; alt adds x
// to the y equation.  Consumes n exponential draws then n chi-squared draws.
Dataset gen_example1(const Eigen::MatrixXd& z, Rng& rng, bool alt);

// Poisson responses with log mu = a1 rowsum(z) + sigma a2 eta, where a1 and
// a2 scale the realized maxima of their terms to 3 (0 if the term is
// identically 0).  The x argument is carried into the returned values only
// through the caller; the mean depends on z alone.
Eigen::VectorXd gen_poisson_misspec(const Eigen::MatrixXd& z, double sigma, Rng& rng);

struct ParametrizedDraw {
  Dataset ds;
  double theta = 0.0;  // truth for coverage scoring
};

// Partially linear y = theta x + f(z, eps) from a realized design w
// (n x (p+1); first column becomes x).  theta ~ U[0,2]; eleven U[0,2]
// coefficients on the leading z columns; setting 'b' squashes z through
// 2 e^z/(1+e^z) - 1; setting 'c' adds U[0,2]/11 pairwise interactions and
// wraps the whole nuisance (noise included) in a logistic.  Draw order:
// theta, beta, interaction block (c only), then the n noise terms.
ParametrizedDraw gen_partial_linear(char setting, const Eigen::MatrixXd& w, Rng& rng);

// Binary x and y given z: logit of the y-probability is sum_{j<=24} a_j b_j
// z_j with a_j = 1 - (j-1)/24 and b_j ~ U[0,1]; the x-probability uses the
// first 4 terms of the same sum.  alt adds x (coefficient 1) to the y logit.
// Draw order: the 24 coefficients, then n x-draws, then n y-draws.
Dataset gen_logistic_hd(const Eigen::MatrixXd& z, Rng& rng, bool alt);

// y = x - 0.5 z1 + 0.7 z2 + eps with (x, z) the columns of a realized
// design w (first column is x); truth theta = 1.
ParametrizedDraw gen_confint(const Eigen::MatrixXd& w, Rng& rng);

// One replicate's outcome.  Failed replicates keep their error text and are
// excluded from the aggregates.
struct RepRecord {
  long replicate = 0;  // 1-based
  bool failed = false;
  std::string error;
  double statistic = 0.0;
  double p_value = 1.0;
  double estimate = 0.0;  // exposure-coefficient estimate when the method has one
  bool has_estimate = false;
  double lower = 0.0, upper = 0.0, truth = 0.0;
  bool covered = false;
  bool has_interval = false;
  // Full diagnostics map from the underlying test, so downstream checks can
  // compare e.g. the uncorrected Wald statistic against the reported one on
  // the same replicates without re-running the fit.
  std::map<std::string, double> diagnostics;
};

struct McSummary {
  std::string scenario;
  std::string method;
  long replicates = 0;  // requested count, including failures
  long failures = 0;
  std::uint64_t seed = 0;
  double alpha = 0.05;
  std::vector<RepRecord> records;  // in replicate order
  std::vector<double> p_values;    // successful replicates, replicate order
  std::optional<double> coverage;  // fraction of intervals covering the truth
  double ks_vs_uniform = 0.0;      // KS distance of p_values from U[0,1]

  // Fraction of successful replicates with p_value <= a.
  double rejection_rate(double a) const;
};

struct McOptions {
  double lambda_a = 1.05;       // fixed-a multiplier for the default lambda
  bool lambda_quantile = false; // use the quantile rule instead
  long threads = 1;
  double failure_cap = 0.02;    // error out beyond this failure fraction
};

// Runs `replicates` draws of the scenario, applying `method` (a test tag
// t-ols, t-ols-exact, t-glm, t-def, t-db, t-w-def, t-glm-def, or an interval
// tag def-ci, db-ci) to each.  Replicate r uses the child stream
// Rng(seed).split(r); results are deterministic for fixed inputs regardless
// of thread count.  Per-replicate errors are recorded and excluded from the
// aggregates; more than failure_cap of them fails the whole run.
McSummary run_monte_carlo(const Scenario& scenario, const std::string& method,
                          long replicates, double alpha, const McOptions& opts = {});

// Writes pvalues.csv, ecdf.csv and coverage.csv under dir (created if
// needed).  Every file starts with a '#' comment line documenting its
// columns; numbers use 17 significant digits so identical runs are
// byte-identical.
void write_outputs(const McSummary& summary, const std::string& dir);

}  // namespace defi
