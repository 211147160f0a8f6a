#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "defi/errors.hpp"
#include "defi/prob.hpp"
#include "defi/rng.hpp"
#include "defi/sqrt_lasso.hpp"
#include "doctest.h"
#include "oracle_sqrt_lasso.hpp"

using namespace defi;

namespace {

struct Instance {
  Eigen::VectorXd y;
  Eigen::MatrixXd x;
};

Instance random_instance(std::uint64_t seed, long n, long p, long s = 3) {
  Rng rng(seed);
  Instance ins;
  ins.x.resize(n, p);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < p; ++j) ins.x(i, j) = rng.normal();
  ins.y.resize(n);
  for (long i = 0; i < n; ++i) {
    double m = 0.0;
    for (long j = 0; j < s && j < p; ++j) m += ins.x(i, j) * (j + 1) * 0.5;
    ins.y[i] = m + rng.normal();
  }
  return ins;
}

}  // namespace

TEST_CASE("default lambda: frozen value, closed form, and input guards") {
  // A sqrt(2 log(p)/n) with A = 1.05, frozen at full precision.
  CHECK(default_lambda(100, 500, 1.05) == doctest::Approx(0.37017848204644382).epsilon(1e-14));
  CHECK(default_lambda(80, 40, 1.2) ==
        doctest::Approx(1.2 * std::sqrt(2.0 * std::log(40.0) / 80.0)).epsilon(1e-14));
  CHECK_THROWS_AS(default_lambda(100, 500, 1.0), ValidationError);
  CHECK_THROWS_AS(default_lambda(100, 500, 0.9), ValidationError);
  CHECK_THROWS_AS(default_lambda(100, 1, 1.05), ValidationError);
  CHECK_THROWS_AS(default_lambda(0, 10, 1.05), ValidationError);
}

TEST_CASE("quantile lambda solves its defining fixed point") {
  for (auto [n, p] : {std::pair<long, long>{100, 200}, {100, 500}, {200, 500},
                      {100, 300}, {250, 100}}) {
    const double lam = quantile_lambda(n, p);
    const double l = lam * std::sqrt(double(n)) / std::sqrt(2.0);
    const double k = double(p) * (1.0 - prob::normal_cdf(l));
    CHECK(k == doctest::Approx(l * l * l * l + 2.0 * l * l).epsilon(1e-6));
  }
  // Frozen values so silent drift in the rule is caught immediately.
  CHECK(quantile_lambda(100, 200) == doctest::Approx(0.22402996780895376).epsilon(1e-10));
  CHECK(quantile_lambda(100, 500) == doctest::Approx(0.25655909528181164).epsilon(1e-10));
  CHECK(quantile_lambda(200, 500) == doctest::Approx(0.18141467604885458).epsilon(1e-10));
  // Less aggressive than the default rule at these shapes.
  CHECK(quantile_lambda(100, 200) < default_lambda(100, 200, 1.05));
  // Monotone: more observations shrink it, more columns grow it.
  CHECK(quantile_lambda(200, 200) < quantile_lambda(100, 200));
  CHECK(quantile_lambda(100, 400) > quantile_lambda(100, 200));
  CHECK_THROWS_AS(quantile_lambda(0, 10), ValidationError);
  CHECK_THROWS_AS(quantile_lambda(50, 1), ValidationError);
}

TEST_CASE("solutions certify their KKT conditions") {
  for (std::uint64_t seed : {401ull, 402ull, 403ull, 404ull}) {
    const Instance ins = random_instance(seed, 60, 90);
    const double lam = default_lambda(60, 90, 1.05);
    const LassoFit fit = solve_sqrt_lasso(ins.y, ins.x, lam);
    REQUIRE(!fit.degenerate);
    CHECK(kkt_certificate(fit, ins.x) <= 1e-6);
    CHECK(fit.kkt_slack <= 1e-6);
    CHECK(fit.sigma_hat ==
          doctest::Approx(fit.residuals.norm() / std::sqrt(60.0)).epsilon(1e-12));
    CHECK((fit.residuals - (ins.y - ins.x * fit.coefficients)).cwiseAbs().maxCoeff() <
          1e-10);
  }
}

TEST_CASE("objective matches the independent FISTA reference") {
  for (std::uint64_t seed : {411ull, 412ull, 413ull}) {
    const Instance ins = random_instance(seed, 50, 70);
    const double lam = default_lambda(50, 70, 1.05);
    const LassoFit fit = solve_sqrt_lasso(ins.y, ins.x, lam);
    const double obj_cd =
        sqrt_lasso_objective(ins.y, ins.x, fit.coefficients, lam);
    const double obj_ref = defi_test::fista_sqrt_lasso(ins.y, ins.x, lam);
    CHECK(std::fabs(obj_cd - obj_ref) < 1e-7);
  }
}

TEST_CASE("overwhelming penalty shrinks everything to zero") {
  const Instance ins = random_instance(421, 40, 25);
  const LassoFit fit = solve_sqrt_lasso(ins.y, ins.x, 50.0);
  CHECK(fit.coefficients.cwiseAbs().maxCoeff() == 0.0);
  CHECK(fit.sigma_hat ==
        doctest::Approx(ins.y.norm() / std::sqrt(40.0)).epsilon(1e-12));
}

TEST_CASE("response scaling scales the solution (equivariance)") {
  const Instance ins = random_instance(422, 55, 80);
  const double lam = default_lambda(55, 80, 1.05);
  const LassoFit base = solve_sqrt_lasso(ins.y, ins.x, lam);
  for (double c : {3.0, 0.125, -2.0}) {
    const LassoFit scaled = solve_sqrt_lasso(c * ins.y, ins.x, lam);
    const double tol = 1e-8 * std::max(1.0, base.coefficients.cwiseAbs().maxCoeff());
    CHECK((scaled.coefficients - c * base.coefficients).cwiseAbs().maxCoeff() < tol);
  }
}

TEST_CASE("zero penalty weight unpenalizes a column") {
  const Instance ins = random_instance(423, 60, 10);
  const double lam = default_lambda(60, 10, 1.05);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(10);
  w[2] = 0.0;
  SqrtLassoOptions opts;
  opts.penalty_weights = &w;
  const LassoFit fit = solve_sqrt_lasso(ins.y, ins.x, lam, opts);
  REQUIRE(!fit.degenerate);
  // Unpenalized stationarity is plain orthogonality of column 2.
  const double g = std::fabs(ins.x.col(2).dot(fit.residuals)) /
                   (std::sqrt(60.0) * fit.residuals.norm());
  CHECK(g < 1e-6);
  CHECK(kkt_certificate(fit, ins.x) <= 1e-6);
}

TEST_CASE("warm starts reproduce the converged solution immediately") {
  const Instance ins = random_instance(424, 50, 60);
  const double lam = default_lambda(50, 60, 1.05);
  const LassoFit cold = solve_sqrt_lasso(ins.y, ins.x, lam);
  SqrtLassoOptions opts;
  opts.warm_start = &cold.coefficients;
  const LassoFit warm = solve_sqrt_lasso(ins.y, ins.x, lam, opts);
  CHECK((warm.coefficients - cold.coefficients).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(warm.iterations <= cold.iterations);
}

TEST_CASE("solve_augmented is the solver on the concatenated design") {
  const Instance ins = random_instance(425, 45, 30);
  const Eigen::MatrixXd a = ins.x.leftCols(12);
  const Eigen::MatrixXd b = ins.x.rightCols(18);
  const double lam = default_lambda(45, 30, 1.05);
  const LassoFit split = solve_augmented(ins.y, a, b, lam);
  const LassoFit joint = solve_sqrt_lasso(ins.y, ins.x, lam);
  CHECK((split.coefficients - joint.coefficients).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(split.sigma_hat == doctest::Approx(joint.sigma_hat).epsilon(1e-10));
}

TEST_CASE("zero columns are skipped, not fatal") {
  Instance ins = random_instance(426, 40, 8);
  ins.x.col(5).setZero();
  const LassoFit fit = solve_sqrt_lasso(ins.y, ins.x, default_lambda(40, 8, 1.05));
  CHECK(fit.coefficients[5] == 0.0);
  CHECK(!fit.degenerate);
}

TEST_CASE("input validation") {
  const Instance ins = random_instance(427, 30, 5);
  CHECK_THROWS_AS(solve_sqrt_lasso(ins.y, ins.x, 0.0), ValidationError);
  CHECK_THROWS_AS(solve_sqrt_lasso(ins.y, ins.x, -0.5), ValidationError);
  CHECK_THROWS_AS(solve_sqrt_lasso(ins.y.head(10), ins.x, 0.3), ValidationError);
  Eigen::VectorXd bad = ins.y;
  bad[0] = std::nan("");
  CHECK_THROWS_AS(solve_sqrt_lasso(bad, ins.x, 0.3), ValidationError);
}
