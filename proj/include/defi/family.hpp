#pragma once
// One-parameter exponential-family links used by the GLM fitters: gaussian
// with identity link, binomial with logit link, poisson with log link.  U is
// the per-observation score in the linear predictor, U' its derivative; for
// the non-gaussian families eta is clamped to +-30 before exponentiation and
// callers count clamp events for diagnostics.
#include <cmath>
#include <limits>
#include <string_view>

namespace defi {

enum class FamilyTag { gaussian, binomial, poisson };

class GlmFamily {
 public:
  static GlmFamily gaussian() { return GlmFamily(FamilyTag::gaussian); }
  static GlmFamily binomial() { return GlmFamily(FamilyTag::binomial); }
  static GlmFamily poisson() { return GlmFamily(FamilyTag::poisson); }

  // Accepts "gaussian", "binomial", "poisson"; throws ValidationError otherwise.
  static GlmFamily parse(std::string_view name);

  FamilyTag tag() const { return tag_; }
  const char* name() const;

  // |eta| beyond this is clamped inside mu/U/U'; infinite for gaussian.
  double eta_limit() const {
    return tag_ == FamilyTag::gaussian ? std::numeric_limits<double>::infinity() : 30.0;
  }

  double clamp_eta(double eta) const {
    const double lim = eta_limit();
    if (eta > lim) return lim;
    if (eta < -lim) return -lim;
    return eta;
  }

  double mu(double eta) const {
    switch (tag_) {
      case FamilyTag::gaussian: return eta;
      case FamilyTag::binomial: {
        const double e = clamp_eta(eta);
        return 1.0 / (1.0 + std::exp(-e));
      }
      case FamilyTag::poisson: return std::exp(clamp_eta(eta));
    }
    return 0.0;
  }

  double mu_prime(double eta) const {
    switch (tag_) {
      case FamilyTag::gaussian: return 1.0;
      case FamilyTag::binomial: {
        const double m = mu(eta);
        return m * (1.0 - m);
      }
      case FamilyTag::poisson: return std::exp(clamp_eta(eta));
    }
    return 0.0;
  }

  // Variance function V(mu).
  double variance(double m) const {
    switch (tag_) {
      case FamilyTag::gaussian: return 1.0;
      case FamilyTag::binomial: return m * (1.0 - m);
      case FamilyTag::poisson: return m;
    }
    return 0.0;
  }

  // Score U(eta; y) = y - mu(eta) for these canonical links.
  double score(double eta, double y) const { return y - mu(eta); }

  // U'(eta; y) = -mu'(eta); always <= 0.
  double score_deriv(double eta, double y) const {
    (void)y;
    return -mu_prime(eta);
  }

  // Log-likelihood up to terms constant in eta.
  double log_lik(double eta, double y) const {
    switch (tag_) {
      case FamilyTag::gaussian: {
        const double r = y - eta;
        return -0.5 * r * r;
      }
      case FamilyTag::binomial: {
        const double e = clamp_eta(eta);
        // y*eta - log(1 + exp(eta)) evaluated stably on both sides.
        return e > 0.0 ? (y - 1.0) * e - std::log1p(std::exp(-e))
                       : y * e - std::log1p(std::exp(e));
      }
      case FamilyTag::poisson: {
        const double e = clamp_eta(eta);
        return y * e - std::exp(e);
      }
    }
    return 0.0;
  }

  // Unit deviance contribution d(y, mu); sums to the model deviance.
  double unit_deviance(double y, double m) const;

  // Whether y is inside the family's support (0/1 for binomial, nonnegative
  // integer for poisson, any finite value for gaussian).
  bool valid_response(double y) const;

 private:
  explicit GlmFamily(FamilyTag t) : tag_(t) {}
  FamilyTag tag_;
};

}  // namespace defi
