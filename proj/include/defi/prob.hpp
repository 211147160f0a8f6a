#pragma once
// Normal and Student-t distribution helpers.  No table lookups: the normal
// quantile uses Wichura's rational approximations (full double accuracy) and
// the t CDF goes through the regularized incomplete beta function.

namespace defi::prob {

double normal_cdf(double x);

// 2 * (1 - Phi(|t|)), computed as erfc(|t|/sqrt(2)) to keep tail accuracy.
double normal_two_sided_p(double t);

// Inverse of normal_cdf on (0, 1).  Throws ValidationError outside (0, 1).
double normal_quantile(double p);

// Regularized incomplete beta I_x(a, b) for a, b > 0 and x in [0, 1].
double reg_inc_beta(double x, double a, double b);

double t_cdf(double t, double df);

// 2 * P(T_df > |t|) = I_{df/(df+t^2)}(df/2, 1/2).
double t_two_sided_p(double t, double df);

}  // namespace defi::prob
