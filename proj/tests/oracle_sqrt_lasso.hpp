#pragma once
// Independent reference solver for  min_b ||y - X b||_2/sqrt(n) + lambda||b||_1
// used only by tests.  Deliberately a different algorithm family from the
// library's coordinate descent: accelerated proximal gradient (FISTA) with
// backtracking on the smooth part and a restart whenever the objective rises.
// Slow but simple to audit.
#include <Eigen/Dense>
#include <cmath>

namespace defi_test {

inline double sl_objective(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                           const Eigen::VectorXd& b, double lambda) {
  const double n = double(y.size());
  return (y - x * b).norm() / std::sqrt(n) + lambda * b.cwiseAbs().sum();
}

inline Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t) {
  return v.unaryExpr([t](double a) {
    if (a > t) return a - t;
    if (a < -t) return a + t;
    return 0.0;
  });
}

// Returns the best objective value found.  The iterate is exposed through
// *coef_out when the caller wants it.
inline double fista_sqrt_lasso(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                               double lambda, long max_iter = 20000,
                               Eigen::VectorXd* coef_out = nullptr) {
  const long n = y.size(), p = x.cols();
  const double sqrt_n = std::sqrt(double(n));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p), v = b, b_prev = b;
  double t_mom = 1.0;
  // Initial step from the spectral norm bound: the gradient of ||y-Xb||/sqrt(n)
  // is (1/(sqrt(n)||r||)) X'r-shaped, locally Lipschitz with constant about
  // sigma_max(X)^2/(sqrt(n)||r||); backtracking fixes any underestimate.
  double step = 1.0;
  double best = sl_objective(y, x, b, lambda);
  Eigen::VectorXd best_b = b;
  int flat = 0;
  for (long it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd r = y - x * v;
    const double rn = r.norm();
    if (rn < 1e-14) break;  // interpolating fit; objective is essentially 0
    const double g_v = rn / sqrt_n;
    const Eigen::VectorXd grad = -(x.transpose() * r) / (sqrt_n * rn);
    // Backtracking: shrink until the quadratic model bounds the smooth part.
    Eigen::VectorXd b_new;
    for (int bt = 0; bt < 60; ++bt) {
      b_new = soft_threshold(v - step * grad, step * lambda);
      const Eigen::VectorXd d = b_new - v;
      const double g_new = (y - x * b_new).norm() / sqrt_n;
      if (g_new <= g_v + grad.dot(d) + d.squaredNorm() / (2.0 * step) + 1e-15)
        break;
      step *= 0.5;
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_mom * t_mom));
    v = b_new + ((t_mom - 1.0) / t_next) * (b_new - b);
    b_prev = b;
    b = b_new;
    t_mom = t_next;
    const double obj = sl_objective(y, x, b, lambda);
    if (obj > best + 1e-15) {  // momentum overshoot: restart
      v = b;
      t_mom = 1.0;
    }
    if (obj < best - 1e-13 * (1.0 + best)) {
      best = obj;
      best_b = b;
      flat = 0;
    } else if (++flat > 100) {
      break;  // no measurable progress for a long stretch
    }
    if (obj < best) {
      best = obj;
      best_b = b;
    }
    // Occasionally allow the step to grow back so one early shrink does not
    // slow the whole run.
    if (it % 50 == 49) step *= 2.0;
  }
  if (coef_out) *coef_out = best_b;
  return best;
}

}  // namespace defi_test
