#include "defi/family.hpp"

#include <string>

#include "defi/errors.hpp"

namespace defi {

GlmFamily GlmFamily::parse(std::string_view name) {
  if (name == "gaussian") return gaussian();
  if (name == "binomial") return binomial();
  if (name == "poisson") return poisson();
  throw ValidationError("unknown family \"" + std::string(name) +
                        "\" (expected gaussian, binomial, or poisson)");
}

const char* GlmFamily::name() const {
  switch (tag_) {
    case FamilyTag::gaussian: return "gaussian";
    case FamilyTag::binomial: return "binomial";
    case FamilyTag::poisson: return "poisson";
  }
  return "?";
}

double GlmFamily::unit_deviance(double y, double m) const {
  switch (tag_) {
    case FamilyTag::gaussian: {
      const double r = y - m;
      return r * r;
    }
    case FamilyTag::binomial: {
      // 2[y log(y/m) + (1-y) log((1-y)/(1-m))] with 0 log 0 = 0.
      double d = 0.0;
      if (y > 0.0) d += y * std::log(y / m);
      if (y < 1.0) d += (1.0 - y) * std::log((1.0 - y) / (1.0 - m));
      return 2.0 * d;
    }
    case FamilyTag::poisson: {
      double d = m - y;
      if (y > 0.0) d += y * std::log(y / m);
      return 2.0 * d;
    }
  }
  return 0.0;
}

bool GlmFamily::valid_response(double y) const {
  if (!std::isfinite(y)) return false;
  switch (tag_) {
    case FamilyTag::gaussian: return true;
    case FamilyTag::binomial: return y == 0.0 || y == 1.0;
    case FamilyTag::poisson: return y >= 0.0 && y == std::floor(y);
  }
  return false;
}

}  // namespace defi
