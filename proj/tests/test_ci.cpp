#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "defi/ci.hpp"
#include "defi/dataset.hpp"
#include "defi/def_test.hpp"
#include "defi/errors.hpp"
#include "defi/prob.hpp"
#include "defi/rng.hpp"
#include "defi/sim.hpp"
#include "defi/sqrt_lasso.hpp"
#include "doctest.h"

using namespace defi;

namespace {

// Sparse linear truth with a known exposure coefficient.
struct Draw {
  Dataset ds;
  double theta = 0.0;
};

Draw linear_draw(std::uint64_t seed, long n, long p, double theta) {
  Rng rng(seed);
  Eigen::MatrixXd z = toeplitz_gaussian(n, p, 0.6, rng);
  Eigen::VectorXd x(n), y(n);
  for (long i = 0; i < n; ++i) x[i] = 0.7 * z(i, 0) + rng.normal();
  for (long i = 0; i < n; ++i)
    y[i] = theta * x[i] - 0.5 * z(i, 1) + 0.7 * z(i, 2) + rng.normal();
  Draw d;
  d.ds = Dataset(std::move(y), std::move(x), std::move(z));
  d.theta = theta;
  return d;
}

}  // namespace

TEST_CASE("t_def_at is t-def on the shifted response") {
  const Draw d = linear_draw(601, 60, 80, 1.2);
  const double lam = quantile_lambda(60, 80);
  for (double t : {0.0, 0.8, 1.2, 2.5}) {
    Dataset shifted = d.ds;
    shifted.y = d.ds.y - t * d.ds.x;
    CHECK(t_def_at(d.ds, t, lam, lam) ==
          doctest::Approx(t_def(shifted, lam, lam).statistic).epsilon(1e-12));
  }
}

TEST_CASE("interval endpoints sit on the z_alpha contour") {
  const Draw d = linear_draw(602, 80, 100, 1.0);
  const double lam = quantile_lambda(80, 100);
  const Interval iv = confidence_interval(d.ds, 0.05, lam, lam);
  const double z = prob::normal_quantile(0.975);
  REQUIRE(iv.lower < iv.upper);
  // The bisection stops when |T| is within 1e-3 of z_alpha or the bracket is
  // very tight; either way the statistic at the endpoints is near the contour.
  CHECK(std::fabs(std::fabs(t_def_at(d.ds, iv.lower, lam, lam)) - z) < 2e-2);
  CHECK(std::fabs(std::fabs(t_def_at(d.ds, iv.upper, lam, lam)) - z) < 2e-2);
  // Strictly inside, the test accepts.
  const double mid = 0.5 * (iv.lower + iv.upper);
  CHECK(std::fabs(t_def_at(d.ds, mid, lam, lam)) < z);
  CHECK(iv.evaluations > 0);
  CHECK(iv.diagnostics.count("t_best") == 1);
  CHECK(iv.diagnostics.at("t_best") >= iv.lower - 1e-9);
  CHECK(iv.diagnostics.at("t_best") <= iv.upper + 1e-9);
}

TEST_CASE("the statistic is location equivariant in the exposure direction") {
  const Draw d = linear_draw(603, 60, 70, 0.8);
  const double lam = quantile_lambda(60, 70);
  Dataset shifted = d.ds;
  const double c = 1.75;
  shifted.y = d.ds.y + c * d.ds.x;
  for (double t : {0.2, 0.8, 1.9}) {
    CHECK(t_def_at(shifted, t + c, lam, lam) ==
          doctest::Approx(t_def_at(d.ds, t, lam, lam)).epsilon(1e-6).scale(1.0));
  }
  // And so is the interval, up to the bisection tolerance.
  const Interval a = confidence_interval(d.ds, 0.05, lam, lam);
  const Interval b = confidence_interval(shifted, 0.05, lam, lam);
  CHECK(b.lower - a.lower == doctest::Approx(c).epsilon(1e-4).scale(1.0));
  CHECK(b.upper - a.upper == doctest::Approx(c).epsilon(1e-4).scale(1.0));
}

TEST_CASE("smaller alpha gives a wider (nested) interval") {
  const Draw d = linear_draw(604, 70, 90, 1.5);
  const double lam = quantile_lambda(70, 90);
  const Interval narrow = confidence_interval(d.ds, 0.10, lam, lam);
  const Interval wide = confidence_interval(d.ds, 0.05, lam, lam);
  CHECK(wide.lower <= narrow.lower + 2e-3);
  CHECK(wide.upper >= narrow.upper - 2e-3);
  CHECK(wide.upper - wide.lower > narrow.upper - narrow.lower - 2e-3);
}

TEST_CASE("warm starts change the work, not the answer") {
  const Draw d = linear_draw(605, 60, 80, 1.0);
  const double lam = quantile_lambda(60, 80);
  InversionOptions cold;
  cold.use_warm_starts = false;
  const Interval a = confidence_interval(d.ds, 0.05, lam, lam);
  const Interval b = confidence_interval(d.ds, 0.05, lam, lam, cold);
  CHECK(a.lower == doctest::Approx(b.lower).epsilon(2e-3).scale(1.0));
  CHECK(a.upper == doctest::Approx(b.upper).epsilon(2e-3).scale(1.0));
}

TEST_CASE("easy problems cover the truth") {
  for (std::uint64_t seed : {606ull, 607ull, 608ull}) {
    const Draw d = linear_draw(seed, 120, 60, 1.3);
    const double lam = quantile_lambda(120, 60);
    const Interval iv = confidence_interval(d.ds, 0.05, lam, lam);
    CHECK(iv.lower < d.theta);
    CHECK(iv.upper > d.theta);
    CHECK(iv.upper - iv.lower < 2.0);
  }
}

TEST_CASE("db interval matches a from-scratch evaluation of its formula") {
  const Draw d = linear_draw(609, 80, 100, 1.1);
  const double lam = quantile_lambda(80, 100);
  const Interval iv = db_interval(d.ds, 0.05, lam, lam);

  const auto [zs, zscales] = standardize_columns(d.ds.z);
  Eigen::MatrixXd xmat(d.ds.n(), 1);
  xmat.col(0) = d.ds.x;
  const auto [xs, xscales] = standardize_columns(xmat);
  const LassoFit aug = solve_augmented(d.ds.y, xs, zs, lam);
  const LassoFit fx = solve_sqrt_lasso(d.ds.x, zs, lam);
  const double rxx = fx.residuals.dot(d.ds.x);
  const double theta_hat = aug.coefficients[0] * xscales[0];
  const double theta_db = theta_hat + fx.residuals.dot(aug.residuals) / rxx;
  const double se = aug.sigma_hat * fx.residuals.norm() / std::fabs(rxx);
  const double z = prob::normal_quantile(0.975);

  CHECK(iv.lower == doctest::Approx(theta_db - z * se).epsilon(1e-10));
  CHECK(iv.upper == doctest::Approx(theta_db + z * se).epsilon(1e-10));
  CHECK(iv.diagnostics.at("theta_db") == doctest::Approx(theta_db).epsilon(1e-10));
}

TEST_CASE("wbeta statistic zeroes out on degenerate inputs") {
  Rng rng(610);
  const long n = 30, p = 10;
  Eigen::MatrixXd z(n, p);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < p; ++j) z(i, j) = rng.normal();
  const Eigen::VectorXd w = Eigen::VectorXd::Unit(p, 0);
  // Response constructed to vanish after the projection step.
  const Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  CHECK(wbeta_test(y, z, w, 0.0, 0.3) == 0.0);
}

TEST_CASE("wbeta region on a coordinate matches the per-coefficient interval") {
  const Draw d = linear_draw(611, 80, 40, 0.0);
  // Test the coefficient of z's column 2 (true value 0.7) by treating that
  // column as the exposure.
  const long j = 2;
  const double lam = quantile_lambda(80, 40);
  Eigen::VectorXd ej = Eigen::VectorXd::Zero(40);
  ej[j] = 1.0;
  // y here includes theta * x with theta = 0, so y depends on z only.
  const Interval a = wbeta_region(d.ds.y, d.ds.z, ej, 0.05, lam);

  Dataset per;
  per.y = d.ds.y;
  per.x = d.ds.z.col(j);
  per.z.resize(80, 39);
  per.z << d.ds.z.leftCols(j), d.ds.z.rightCols(39 - j);
  const Interval b = confidence_interval(per, 0.05, lam, lam);
  CHECK(a.lower == doctest::Approx(b.lower).epsilon(5e-3).scale(1.0));
  CHECK(a.upper == doctest::Approx(b.upper).epsilon(5e-3).scale(1.0));
  CHECK(a.lower < 0.7);
  CHECK(a.upper > 0.7);
}

TEST_CASE("alpha validation") {
  const Draw d = linear_draw(612, 40, 20, 1.0);
  CHECK_THROWS_AS(confidence_interval(d.ds, 0.0, 0.3, 0.3), ValidationError);
  CHECK_THROWS_AS(confidence_interval(d.ds, 1.0, 0.3, 0.3), ValidationError);
  CHECK_THROWS_AS(db_interval(d.ds, -0.1, 0.3, 0.3), ValidationError);
}
