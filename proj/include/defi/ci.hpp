#pragma once
#include <Eigen/Dense>
#include <map>
#include <string>

#include "defi/dataset.hpp"

namespace defi {

// Confidence region from test inversion: the set {t : |T_t| <= z_alpha}
// located by bracketed bisection.
struct Interval {
  double lower = 0.0;
  double upper = 0.0;
  double alpha = 0.0;
  long evaluations = 0;         // statistic evaluations spent by the search
  long bracket_expansions = 0;  // geometric step doublings used
  bool disconnected_flag = false;
  std::map<std::string, double> diagnostics;
};

struct InversionOptions {
  bool use_warm_starts = true;  // chain lasso coefficients between evaluations
};

// T at the shifted exposure value: the regularized partial-correlation
// statistic of (y - t x, x, z).  Cold-start entry point; the interval search
// below uses an internal warm-started equivalent.
double t_def_at(const Dataset& ds, double t, double lambda_x, double lambda_y);

// Interval of t values where |t_def_at| <= z_alpha.  Bracketing starts from a
// ridge pilot estimate of the exposure coefficient and expands by step
// doubling (initial step 4 sd(y)/sqrt(n)); bisection stops when the statistic
// is within 1e-3 of z_alpha or the bracket is narrower than 1e-4 of the
// initial step.  A 17-point scan across the final bracket flags (but does not
// fail on) a disconnected acceptance region; the reported interval is the
// connected component around the best t found.  Throws NoCrossingError when
// 60 doublings never take the statistic across z_alpha.
Interval confidence_interval(const Dataset& ds, double alpha, double lambda_x,
                             double lambda_y, const InversionOptions& opts = {});

// Statistic for a linear functional w'beta of the coefficients of y on z.
// With P = w w'/||w||^2, regress y - t z w/||w||^2 on the projected design
// z(I - P) (columns rescaled to mean-square 1) and correlate the residual
// with the residual R of z w regressed on the same design:
//   T = sqrt(n) R'(y_t - z(I-P) bhat) / (||R|| ||y_t - z(I-P) bhat||).
// Zero denominators give statistic 0, mirroring the main test.
double wbeta_test(const Eigen::VectorXd& y, const Eigen::MatrixXd& z,
                  const Eigen::VectorXd& w, double t, double lambda);

// Inversion of wbeta_test over t; same search machinery and telemetry as
// confidence_interval, with the ridge pilot taken as w' (ridge fit of y on z).
Interval wbeta_region(const Eigen::VectorXd& y, const Eigen::MatrixXd& z,
                      const Eigen::VectorXd& w, double alpha, double lambda,
                      const InversionOptions& opts = {});

// One-step bias-corrected lasso interval, the analytic baseline the inverted
// interval is compared against:
//   theta_db = theta_hat + rx'(y - x theta_hat - z bhat) / (rx' x)
//   se       = sigma_hat ||rx||_2 / |rx' x|
// with (theta_hat, bhat) from the augmented sqrt-lasso of y on [x z] and rx
// the sqrt-lasso residual of x on z.  Interval theta_db +/- z_alpha se.
Interval db_interval(const Dataset& ds, double alpha, double lambda_x, double lambda_y);

}  // namespace defi
