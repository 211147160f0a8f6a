#pragma once
#include <Eigen/Dense>

namespace defi {

// Solution of  min_b ||y - X b||_2 / sqrt(n) + lambda * sum_j w_j |b_j|.
struct LassoFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;       // y - X b
  double sigma_hat = 0.0;          // ||residuals||_2 / sqrt(n)
  double lambda = 0.0;
  Eigen::VectorXd penalty_weights; // per-column multiplier on lambda (all 1 if empty)
  double kkt_slack = 0.0;          // stationarity certificate, see kkt_certificate
  long iterations = 0;             // total coordinate-descent sweeps
  bool degenerate = false;         // residual collapsed to (numerically) zero
};

struct SqrtLassoOptions {
  double coef_tol = 1e-10;       // stop a sweep phase when max |delta b_j| < this
  double sigma_rel_tol = 1e-10;  // fixed-point tolerance on sigma_hat
  long max_outer = 500;          // sigma updates
  long max_sweeps = 200000;      // hard cap on total CD sweeps
  const Eigen::VectorXd* warm_start = nullptr;       // initial coefficients
  const Eigen::VectorXd* penalty_weights = nullptr;  // >= 0; 0 means unpenalized
};

// Tuning level A * sqrt(2 log(p) / n); requires p >= 2, A > 1.
double default_lambda(long n, long p, double a = 1.05);

// Quantile-based alternative: sqrt(2) * Phi^-1(1 - k/p) / sqrt(n) where k
// solves k = L^4 + 2L^2 with L = Phi^-1(1 - k/p).  Noticeably smaller than
// default_lambda at moderate n/p, trading selection conservatism for less
// shrinkage bias; preferred when inverting tests into intervals.
double quantile_lambda(long n, long p);

// Square-root Lasso by alternating coordinate descent on the equivalent
// standard Lasso (penalty lambda * sigma_hat) with the sigma_hat <- ||r||/sqrt(n)
// fixed-point update.  Sweeps cycle over the active set with a full pass
// every 10 iterations; convergence is certified against the KKT conditions.
// Columns with numerically zero norm are skipped (their coefficient stays 0).
// If the residual norm collapses below 1e-12 * ||y||/sqrt(n) the fit is
// returned with degenerate = true.
LassoFit solve_sqrt_lasso(const Eigen::VectorXd& response, const Eigen::MatrixXd& design,
                          double lambda, const SqrtLassoOptions& opts = {});

// Same solver on the column-concatenated design [a b].
LassoFit solve_augmented(const Eigen::VectorXd& response, const Eigen::MatrixXd& a,
                         const Eigen::MatrixXd& b, double lambda,
                         const SqrtLassoOptions& opts = {});

// Max over columns of the stationarity residual
//   inactive j:  |col_j' r| / (sqrt(n) ||r||) - lambda_j
//   active j:    | col_j' r * sign(b_j) / (sqrt(n) ||r||) - lambda_j |
// (lambda_j = lambda * w_j).  <= 0 means strictly interior; a correct
// solution certifies at <= 1e-6.  Throws DegenerateResidualError for
// degenerate fits.
double kkt_certificate(const LassoFit& fit, const Eigen::MatrixXd& design);

// Objective ||y - X b||/sqrt(n) + lambda sum w_j |b_j| for diagnostics/tests.
double sqrt_lasso_objective(const Eigen::VectorXd& response, const Eigen::MatrixXd& design,
                            const Eigen::VectorXd& coefficients, double lambda,
                            const Eigen::VectorXd* penalty_weights = nullptr);

}  // namespace defi
