#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "defi/errors.hpp"
#include "defi/prob.hpp"
#include "doctest.h"

namespace p = defi::prob;

TEST_CASE("normal cdf against externally computed reference points") {
  // Reference values from an independent high-precision implementation,
  // recorded to 16 digits before this module was written.
  CHECK(p::normal_cdf(0.0) == 0.5);
  CHECK(p::normal_cdf(1.0) == doctest::Approx(0.8413447460685429).epsilon(1e-14));
  CHECK(p::normal_cdf(-1.0) == doctest::Approx(0.1586552539314571).epsilon(1e-14));
  CHECK(p::normal_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-14));
  CHECK(p::normal_cdf(-8.0) == doctest::Approx(6.220960574271786e-16).epsilon(1e-10));
  CHECK(p::normal_cdf(40.0) == 1.0);
}

TEST_CASE("normal quantile matches the frozen 97.5% point and inverts the cdf") {
  CHECK(std::fabs(p::normal_quantile(0.975) - 1.9599639845400545) < 1e-12);
  CHECK(std::fabs(p::normal_quantile(0.025) + 1.9599639845400545) < 1e-12);
  CHECK(p::normal_quantile(0.5) == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  for (double x = -5.75; x <= 5.75; x += 0.25) {
    CHECK(p::normal_quantile(p::normal_cdf(x)) == doctest::Approx(x).epsilon(1e-9));
  }
  CHECK_THROWS_AS(p::normal_quantile(0.0), defi::ValidationError);
  CHECK_THROWS_AS(p::normal_quantile(1.0), defi::ValidationError);
  CHECK_THROWS_AS(p::normal_quantile(-0.2), defi::ValidationError);
}

TEST_CASE("two-sided normal p-value: symmetry, tails, the 5% point") {
  CHECK(p::normal_two_sided_p(0.0) == 1.0);
  CHECK(std::fabs(p::normal_two_sided_p(1.9599639845400545) - 0.05) < 1e-12);
  CHECK(p::normal_two_sided_p(3.5) == p::normal_two_sided_p(-3.5));
  // erfc-based tails keep precision far beyond where 1-Phi would round to 0.
  CHECK(p::normal_two_sided_p(10.0) == doctest::Approx(1.523970604832105e-23).epsilon(1e-10));
  CHECK(p::normal_two_sided_p(1.0) < p::normal_two_sided_p(0.5));
}

TEST_CASE("regularized incomplete beta basics") {
  CHECK(p::reg_inc_beta(0.0, 2.0, 3.0) == 0.0);
  CHECK(p::reg_inc_beta(1.0, 2.0, 3.0) == 1.0);
  for (double x = 0.1; x < 1.0; x += 0.2) {
    CHECK(p::reg_inc_beta(x, 1.0, 1.0) == doctest::Approx(x).epsilon(1e-12));
    // Reflection identity ties the two tail evaluations together.
    CHECK(p::reg_inc_beta(x, 2.5, 4.0) + p::reg_inc_beta(1.0 - x, 4.0, 2.5) ==
          doctest::Approx(1.0).epsilon(1e-12));
  }
  // I_x(1, b) has the closed form 1 - (1-x)^b.
  CHECK(p::reg_inc_beta(0.3, 1.0, 5.0) ==
        doctest::Approx(1.0 - std::pow(0.7, 5.0)).epsilon(1e-12));
}

TEST_CASE("student t: frozen oracle, symmetry, and the normal limit") {
  // Two-sided p at t=1 with 3 degrees of freedom, frozen from an external
  // reference before implementation.
  CHECK(std::fabs(p::t_two_sided_p(1.0, 3.0) - 0.3910022189557706) < 1e-12);
  CHECK(p::t_cdf(0.0, 7.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(p::t_cdf(2.0, 5.0) + p::t_cdf(-2.0, 5.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p::t_two_sided_p(2.0, 5.0) == p::t_two_sided_p(-2.0, 5.0));
  // Cauchy special case: F(1) = 3/4.
  CHECK(p::t_cdf(1.0, 1.0) == doctest::Approx(0.75).epsilon(1e-12));
  // Heavier tails than the normal at finite df, converging as df grows.
  CHECK(p::t_two_sided_p(2.0, 4.0) > p::normal_two_sided_p(2.0));
  CHECK(p::t_two_sided_p(2.0, 1e7) ==
        doctest::Approx(p::normal_two_sided_p(2.0)).epsilon(1e-5));
}

TEST_CASE("monotonicity of the two-sided p in |t|") {
  double last = 1.1;
  for (double t = 0.0; t <= 6.0; t += 0.5) {
    const double cur = p::t_two_sided_p(t, 9.0);
    CHECK(cur < last + 1e-15);
    last = cur;
  }
}
