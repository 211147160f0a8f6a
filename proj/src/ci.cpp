#include "defi/ci.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "defi/def_test.hpp"
#include "defi/errors.hpp"
#include "defi/kernels.hpp"
#include "defi/prob.hpp"
#include "defi/sqrt_lasso.hpp"

namespace defi {

namespace {

constexpr int kMaxDoublings = 60;

// sqrt(n) a'b / (||a|| ||b||) with the degenerate-to-zero convention shared
// by all the correlation statistics.
double scaled_corr_or_zero(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) return 0.0;
  return std::sqrt(static_cast<double>(a.size())) *
         kernels::dot(a.data(), b.data(), a.size()) / (na * nb);
}

const Eigen::VectorXd* nearest_warm(const std::map<double, Eigen::VectorXd>& mem,
                                    double t) {
  if (mem.empty()) return nullptr;
  auto it = mem.lower_bound(t);
  if (it == mem.end()) return &std::prev(it)->second;
  if (it == mem.begin()) return &it->second;
  const auto below = std::prev(it);
  return (t - below->first <= it->first - t) ? &below->second : &it->second;
}

// ---------------------------------------------------------------------------
// Statistic evaluators.  Each owns the t-independent half of its problem
// (solved once) and a warm-start memory of lasso coefficient vectors keyed by
// the t they solved; each evaluation copies the nearest stored vector.

// T_t for the exposure coefficient: the regularized partial-correlation
// statistic of (y - t x, x, z).
class DefEvaluator {
 public:
  DefEvaluator(const Dataset& ds, double lambda_x, double lambda_y, bool warm_on)
      : y_(ds.y), x_(ds.x), lambda_y_(lambda_y), warm_on_(warm_on) {
    if (ds.p() > 0) {
      zs_ = standardize_columns(ds.z).first;
      fit_x_ = solve_sqrt_lasso(ds.x, zs_, lambda_x);
      x_collapsed_ = fit_x_.degenerate;
    } else {
      fit_x_.residuals = ds.x;
      x_collapsed_ = !(ds.x.norm() > 0.0);
    }
  }

  double operator()(double t) {
    const Eigen::VectorXd yt = y_ - t * x_;
    if (zs_.cols() == 0)
      return x_collapsed_ ? 0.0 : scaled_corr_or_zero(yt, fit_x_.residuals);

    SqrtLassoOptions opts;
    Eigen::VectorXd warm_coef;
    if (warm_on_) {
      if (const Eigen::VectorXd* nearest = nearest_warm(warm_, t)) {
        warm_coef = *nearest;
        opts.warm_start = &warm_coef;
      }
    }
    const LassoFit fy = solve_sqrt_lasso(yt, zs_, lambda_y_, opts);
    if (warm_on_) warm_[t] = fy.coefficients;
    if (x_collapsed_ || fy.degenerate) return 0.0;
    return scaled_corr_or_zero(fy.residuals, fit_x_.residuals);
  }

 private:
  Eigen::VectorXd y_, x_;
  Eigen::MatrixXd zs_;  // standardized z; empty when the dataset has p == 0
  double lambda_y_;
  LassoFit fit_x_;            // x-on-z fit, independent of t
  bool x_collapsed_ = false;  // collapsed x residual: statistic identically 0
  bool warm_on_;
  std::map<double, Eigen::VectorXd> warm_;
};

// T_t for a linear functional w'beta of the coefficients of y on z.  The
// projection P = w w'/||w||^2 removes the tested direction from the design;
// the orthogonalization fit of z w on z(I-P) does not depend on t.
class WbetaEvaluator {
 public:
  WbetaEvaluator(const Eigen::VectorXd& y, const Eigen::MatrixXd& z,
                 const Eigen::VectorXd& w, double lambda, bool warm_on)
      : y_(y), lambda_(lambda), warm_on_(warm_on) {
    const long n = y.size();
    if (z.rows() != n) throw ValidationError("z row count does not match y");
    if (z.cols() < 1) throw ValidationError("w'beta test requires at least one z column");
    if (w.size() != z.cols())
      throw ValidationError("w has length " + std::to_string(w.size()) +
                            ", expected " + std::to_string(z.cols()));
    if (!y.allFinite() || !z.allFinite() || !w.allFinite())
      throw ValidationError("non-finite values in w'beta test inputs");
    const double wn2 = w.squaredNorm();
    if (!(wn2 > 0.0)) throw ValidationError("w must be nonzero");
    inv_wn2_ = 1.0 / wn2;
    zw_ = z * w;
    zp_ = scale_columns_allow_zero(z - (zw_ * (inv_wn2_ * w).transpose())).first;
    fit_r_ = solve_sqrt_lasso(zw_, zp_, lambda);
    r_collapsed_ = fit_r_.degenerate || !(fit_r_.residuals.norm() > 0.0);
  }

  double operator()(double t) {
    const Eigen::VectorXd yt = y_ - (t * inv_wn2_) * zw_;
    SqrtLassoOptions opts;
    Eigen::VectorXd warm_coef;
    if (warm_on_) {
      if (const Eigen::VectorXd* nearest = nearest_warm(warm_, t)) {
        warm_coef = *nearest;
        opts.warm_start = &warm_coef;
      }
    }
    const LassoFit fit = solve_sqrt_lasso(yt, zp_, lambda_, opts);
    if (warm_on_) warm_[t] = fit.coefficients;
    if (r_collapsed_ || fit.degenerate) return 0.0;
    return scaled_corr_or_zero(fit_r_.residuals, fit.residuals);
  }

 private:
  Eigen::VectorXd y_, zw_;
  Eigen::MatrixXd zp_;  // column-rescaled z(I - P)
  double inv_wn2_ = 0.0;
  double lambda_;
  LassoFit fit_r_;  // z w on z(I - P), independent of t
  bool r_collapsed_ = false;
  bool warm_on_;
  std::map<double, Eigen::VectorXd> warm_;
};

// ---------------------------------------------------------------------------
// Search engine shared by both inversions.

struct Search {
  std::function<double(double)> stat;
  double z = 0.0;  // acceptance threshold z_alpha
  std::map<double, double> seen;
  long evaluations = 0;
  long expansions = 0;
  double best_t = std::numeric_limits<double>::quiet_NaN();
  double best_abs = std::numeric_limits<double>::infinity();

  double eval(double t) {
    auto it = seen.find(t);
    if (it != seen.end()) return it->second;
    const double s = stat(t);
    ++evaluations;
    seen.emplace(t, s);
    const double a = std::fabs(s);
    if (a < best_abs) {
      best_abs = a;
      best_t = t;
    }
    return s;
  }

  bool inside(double s) const { return std::fabs(s) <= z; }
};

// Locates some t with |T(t)| <= z.  Rings outward from the pilot with doubled
// steps in both directions; if two sampled neighbours straddle the band (T
// jumped from above z to below -z or vice versa) the crossing is bisected,
// which must land inside since T is continuous in t.
double find_interior(Search& s, double t0, double step0) {
  if (s.inside(s.eval(t0))) return t0;
  for (int k = 0; k <= kMaxDoublings; ++k) {
    const double step = step0 * std::ldexp(1.0, k);
    for (const int dir : {+1, -1}) {
      ++s.expansions;
      if (s.inside(s.eval(t0 + dir * step))) return t0 + dir * step;
    }
    for (auto hi = std::next(s.seen.begin()); hi != s.seen.end(); ++hi) {
      const auto lo = std::prev(hi);
      double a = lo->first;
      double b = hi->first;
      const double sa = lo->second;
      const double sb = hi->second;
      if (!((sa > s.z && sb < -s.z) || (sa < -s.z && sb > s.z))) continue;
      for (int i = 0; i < 200; ++i) {
        const double m = 0.5 * (a + b);
        const double sm = s.eval(m);
        if (s.inside(sm)) return m;
        ((sm > 0.0) == (sa > 0.0) ? a : b) = m;
        if (!(b - a > 1e-15 * (1.0 + std::fabs(a)))) break;
      }
    }
  }
  throw NoCrossingError("no acceptance point found: |T| stayed above z_alpha through " +
                        std::to_string(kMaxDoublings) + " bracket doublings on both sides");
}

struct Bracket {
  double inner;  // |T| <= z here
  double outer;  // |T| >  z here
};

Bracket expand_side(Search& s, double t_mid, double step0, int dir) {
  double inner = t_mid;
  for (int k = 0; k <= kMaxDoublings; ++k) {
    const double t = t_mid + dir * step0 * std::ldexp(1.0, k);
    ++s.expansions;
    if (!s.inside(s.eval(t))) return {inner, t};
    inner = t;
  }
  throw NoCrossingError("statistic never exceeds z_alpha: bracket expansion failed after " +
                        std::to_string(kMaxDoublings) + " doublings");
}

double bisect_endpoint(Search& s, Bracket br, double width_tol) {
  while (std::fabs(br.outer - br.inner) > width_tol) {
    const double m = 0.5 * (br.inner + br.outer);
    const double sm = s.eval(m);
    if (std::fabs(std::fabs(sm) - s.z) <= 1e-3) return m;
    (s.inside(sm) ? br.inner : br.outer) = m;
  }
  return br.inner;
}

Interval invert_region(Search& s, double t0, double step0, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("alpha must lie strictly between 0 and 1");
  if (!std::isfinite(t0)) t0 = 0.0;
  // A zero spread (constant y) still needs a positive step to search with.
  if (!(step0 > 0.0) || !std::isfinite(step0)) step0 = 1.0;
  s.z = prob::normal_quantile(1.0 - alpha / 2.0);

  const double t_mid = find_interior(s, t0, step0);
  const Bracket right = expand_side(s, t_mid, step0, +1);
  const Bracket left = expand_side(s, t_mid, step0, -1);
  const double width_tol = 1e-4 * step0;
  double upper = bisect_endpoint(s, right, width_tol);
  double lower = bisect_endpoint(s, left, width_tol);

  // Scan the full outer bracket for acceptance points beyond the reported
  // endpoints; a hit means the acceptance region is not a single interval.
  bool outside_hit = false;
  for (int i = 0; i <= 16; ++i) {
    const double t = left.outer + (right.outer - left.outer) * (i / 16.0);
    if (s.inside(s.eval(t)) && (t < lower - width_tol || t > upper + width_tol))
      outside_hit = true;
  }

  Interval res;
  res.alpha = alpha;
  res.disconnected_flag = outside_hit;
  if (outside_hit && (s.best_t < lower - width_tol || s.best_t > upper + width_tol)) {
    // The deepest acceptance point lies in another component: report that
    // component instead, re-bracketing locally with a finer step.
    const double fine = step0 / 16.0;
    const Bracket r2 = expand_side(s, s.best_t, fine, +1);
    const Bracket l2 = expand_side(s, s.best_t, fine, -1);
    upper = bisect_endpoint(s, r2, 1e-4 * fine);
    lower = bisect_endpoint(s, l2, 1e-4 * fine);
  }
  res.lower = lower;
  res.upper = upper;
  res.evaluations = s.evaluations;
  res.bracket_expansions = s.expansions;
  res.diagnostics["t_best"] = s.best_t;
  res.diagnostics["abs_statistic_at_best"] = s.best_abs;
  res.diagnostics["z_alpha"] = s.z;
  res.diagnostics["pilot"] = t0;
  res.diagnostics["initial_step"] = step0;
  return res;
}

// Pilot estimate of the exposure coefficient: ridge-stabilized least squares
// of y on [x, top-k z columns by |corr(z_j, y)|] with k = min(p, n/4).
double def_pilot(const Dataset& ds) {
  const long n = ds.n();
  const long p = ds.p();
  const long k = std::min<long>(p, n / 4);
  std::vector<long> order(p);
  std::iota(order.begin(), order.end(), 0L);
  if (k > 0) {
    const Eigen::VectorXd yc = ds.y.array() - ds.y.mean();
    const double yn = yc.norm();
    std::vector<double> score(p);
    for (long j = 0; j < p; ++j) {
      const Eigen::VectorXd zc = ds.z.col(j).array() - ds.z.col(j).mean();
      const double den = zc.norm() * yn;
      score[j] = den > 0.0 ? std::fabs(zc.dot(yc)) / den : 0.0;
    }
    std::partial_sort(order.begin(), order.begin() + k, order.end(),
                      [&](long a, long b) { return score[a] > score[b]; });
  }
  Eigen::MatrixXd m(n, 1 + k);
  m.col(0) = ds.x;
  for (long j = 0; j < k; ++j) m.col(1 + j) = ds.z.col(order[j]);
  Eigen::MatrixXd gram = m.transpose() * m;
  gram.diagonal().array() += 1e-8 * static_cast<double>(n);
  return gram.ldlt().solve(m.transpose() * ds.y)[0];
}

// Pilot for w'beta: ridge fit of y on all of z (dual form when p > n).
double wbeta_pilot(const Eigen::VectorXd& y, const Eigen::MatrixXd& z,
                   const Eigen::VectorXd& w) {
  const long n = z.rows();
  const long p = z.cols();
  const double delta = 1e-2 * z.squaredNorm() / static_cast<double>(p);
  if (!(delta > 0.0)) return 0.0;  // all-zero design
  if (p <= n) {
    Eigen::MatrixXd gram = z.transpose() * z;
    gram.diagonal().array() += delta;
    return w.dot(gram.ldlt().solve(z.transpose() * y));
  }
  Eigen::MatrixXd kernel = z * z.transpose();
  kernel.diagonal().array() += delta;
  return w.dot(z.transpose() * kernel.ldlt().solve(y));
}

double centered_sd(const Eigen::VectorXd& v) {
  return std::sqrt((v.array() - v.mean()).square().mean());
}

}  // namespace

double t_def_at(const Dataset& ds, double t, double lambda_x, double lambda_y) {
  Dataset shifted = ds;
  shifted.y = ds.y - t * ds.x;
  return t_def(shifted, lambda_x, lambda_y).statistic;
}

Interval confidence_interval(const Dataset& ds, double alpha, double lambda_x,
                             double lambda_y, const InversionOptions& opts) {
  ds.validate();
  if (ds.n() < 2) throw ValidationError("interval inversion requires n >= 2");
  DefEvaluator ev(ds, lambda_x, lambda_y, opts.use_warm_starts);
  Search search;
  search.stat = [&ev](double t) { return ev(t); };
  const double step0 = 4.0 * centered_sd(ds.y) / std::sqrt(static_cast<double>(ds.n()));
  Interval res = invert_region(search, def_pilot(ds), step0, alpha);
  res.diagnostics["lambda_x"] = lambda_x;
  res.diagnostics["lambda_y"] = lambda_y;
  return res;
}

double wbeta_test(const Eigen::VectorXd& y, const Eigen::MatrixXd& z,
                  const Eigen::VectorXd& w, double t, double lambda) {
  WbetaEvaluator ev(y, z, w, lambda, /*warm_on=*/false);
  return ev(t);
}

Interval wbeta_region(const Eigen::VectorXd& y, const Eigen::MatrixXd& z,
                      const Eigen::VectorXd& w, double alpha, double lambda,
                      const InversionOptions& opts) {
  WbetaEvaluator ev(y, z, w, lambda, opts.use_warm_starts);
  Search search;
  search.stat = [&ev](double t) { return ev(t); };
  const double step0 = 4.0 * centered_sd(y) / std::sqrt(static_cast<double>(y.size()));
  Interval res = invert_region(search, wbeta_pilot(y, z, w), step0, alpha);
  res.diagnostics["lambda"] = lambda;
  return res;
}

Interval db_interval(const Dataset& ds, double alpha, double lambda_x, double lambda_y) {
  ds.validate();
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("alpha must lie strictly between 0 and 1");
  if (ds.p() < 1)
    throw ValidationError("debiased interval requires at least one z column");

  const auto [zs, zscales] = standardize_columns(ds.z);
  (void)zscales;
  Eigen::MatrixXd xmat(ds.n(), 1);
  xmat.col(0) = ds.x;
  const auto [xs, xscales] = standardize_columns(xmat);

  const LassoFit aug = solve_augmented(ds.y, xs, zs, lambda_y);
  const LassoFit fx = solve_sqrt_lasso(ds.x, zs, lambda_x);
  if (aug.degenerate || fx.degenerate)
    throw DegenerateResidualError("debiased interval undefined: a lasso residual collapsed");
  const double rxx = fx.residuals.dot(ds.x);
  if (!(std::fabs(rxx) > 1e-12 * fx.residuals.norm() * ds.x.norm()))
    throw NumericError("debiased-denominator",
                       "rx' x is numerically zero; one-step correction undefined");

  const double theta_hat = aug.coefficients[0] * xscales[0];
  const double theta_db = theta_hat + fx.residuals.dot(aug.residuals) / rxx;
  const double se = aug.sigma_hat * fx.residuals.norm() / std::fabs(rxx);
  const double z_alpha = prob::normal_quantile(1.0 - alpha / 2.0);

  Interval res;
  res.alpha = alpha;
  res.lower = theta_db - z_alpha * se;
  res.upper = theta_db + z_alpha * se;
  res.diagnostics["theta_db"] = theta_db;
  res.diagnostics["standard_error"] = se;
  res.diagnostics["z_alpha"] = z_alpha;
  return res;
}

}  // namespace defi
