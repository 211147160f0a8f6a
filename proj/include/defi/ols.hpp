#pragma once
#include <Eigen/Dense>

#include "defi/dataset.hpp"
#include "defi/test_result.hpp"

namespace defi {

struct OlsFit {
  Eigen::VectorXd coefficients;  // in design-column order
  Eigen::VectorXd residuals;
  double sigma_tilde_sq = 0.0;  // RSS / (n - cols)
  long projection_rank = 0;
};

// Least squares via column-pivoted Householder QR (relative rank threshold
// 1e-10).  Requires n > cols; throws RankError when the design is rank
// deficient.
OlsFit fit_ols(const Eigen::VectorXd& response, const Eigen::MatrixXd& design);

// Sample partial correlation of x and y given z: correlation of the
// projection residuals (I-P)x and (I-P)y where P projects onto span(z).
// Throws DegenerateResidualError if either residual is numerically zero,
// i.e. the variable lies in the column span of z.
double partial_correlation(const Dataset& ds);

// Partial-correlation test with a standard normal reference:
//   T = sqrt(n - p - 1) * rho / sqrt(1 - rho^2).
// Diagnostics: rho, df, theta_hat (the OLS coefficient on x).
TestResult t_ols(const Dataset& ds);

// Same statistic with the exact Student-t reference on n - p - 1 degrees of
// freedom; identical to the classical t-test for x's coefficient in the
// regression of y on [x z].
TestResult t_ols_exact(const Dataset& ds);

}  // namespace defi
