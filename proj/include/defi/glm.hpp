#pragma once
#include <Eigen/Dense>

#include "defi/dataset.hpp"
#include "defi/family.hpp"
#include "defi/test_result.hpp"

namespace defi {

struct GlmFit {
  Eigen::VectorXd coefficients;  // in design-column order
  Eigen::VectorXd eta;           // design * coefficients
  GlmFamily family = GlmFamily::gaussian();
  double log_lik = 0.0;
  double score_norm = 0.0;  // ||design' U||_inf at the final iterate
  long iterations = 0;
  long clamp_events = 0;  // observations with |eta| past the family limit
  bool converged = false;
};

struct GlmOptions {
  long max_iter = 100;
  // Converged when ||design' U||_inf <= score_tol_per_n * n.
  double score_tol_per_n = 1e-8;
};

// Newton/IRLS with step halving.  The log-likelihood is non-decreasing
// across accepted iterations.  Throws: ValidationError for responses outside
// the family support, RankError for rank-deficient designs, SeparationError
// when logistic coefficients diverge (||beta||_inf > 30), ConvergenceError
// when max_iter is exhausted, SingularHessianError if a Newton system cannot
// be solved.
GlmFit fit_glm(const Eigen::VectorXd& response, const Eigen::MatrixXd& design,
               const GlmFamily& family, const GlmOptions& opts = {});

struct SandwichParts {
  Eigen::MatrixXd h;  // -(1/n) sum d_i d_i' U'_i
  Eigen::MatrixXd v;  // (1/n) sum d_i d_i' U_i^2
  double corrected_var_11 = 0.0;  // (H^-1 V H^-1)_11 / n
};

SandwichParts sandwich(const GlmFit& fit, const Eigen::MatrixXd& design,
                       const Eigen::VectorXd& response);

enum class CorrectionMode {
  full_predictor,   // evaluate U, U' at eta = design * coefficients (default)
  nuisance_only,    // evaluate at eta minus the exposure term
};

// Variance-correction factor c = -sum U_i^2 / sum U'_i.  In nuisance_only
// mode the exposure column (design column 0) is removed from the linear
// predictor first.
double correction_factor(const GlmFit& fit, const Eigen::VectorXd& response,
                         CorrectionMode mode = CorrectionMode::full_predictor,
                         const Eigen::VectorXd* exposure = nullptr);

// GLM score-type test of the exposure coefficient with the corrected
// variance (H^-1)_11 * c / n.  Diagnostics: theta_hat, naive_statistic,
// quasi_statistic, sandwich_statistic, correction_factor, dispersion,
// iterations, clamp_events, score_norm.  For the gaussian family the
// statistic equals t-ols times sqrt(n / (n - p - 1)).
TestResult t_glm(const Dataset& ds, const GlmFamily& family);

}  // namespace defi
