#pragma once

#include <cmath>
#include <stdexcept>

namespace stabsel {

enum class LikelihoodKind { logistic, gaussian };

// Output channel p(y|z).  logistic: p(y|z) = 1/(1+exp(-y z)), y in {-1,+1}.
// gaussian: y | z ~ N(z, noise_variance).
struct Likelihood {
  LikelihoodKind kind = LikelihoodKind::logistic;
  double noise_variance = 1.0;  // gaussian only

  static Likelihood Logistic() { return {LikelihoodKind::logistic, 1.0}; }
  static Likelihood Gaussian(double sigma2) {
    if (!(sigma2 > 0.0)) throw std::domain_error("Likelihood: noise variance must be > 0");
    return {LikelihoodKind::gaussian, sigma2};
  }

  double log_prob(double y, double z) const {
    if (kind == LikelihoodKind::logistic) {
      // -log(1 + exp(-y z)), evaluated stably
      const double t = y * z;
      return t > 0.0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t));
    }
    const double r = y - z;
    return -0.5 * r * r / noise_variance - 0.5 * std::log(2.0 * M_PI * noise_variance);
  }

  // d/dz log p(y|z)
  double dlog(double y, double z) const {
    if (kind == LikelihoodKind::logistic) {
      // y * sigma(-y z)
      const double t = y * z;
      return t > 0.0 ? y * std::exp(-t) / (1.0 + std::exp(-t)) : y / (1.0 + std::exp(t));
    }
    return (y - z) / noise_variance;
  }

  // d^2/dz^2 log p(y|z); <= 0 (log-concave channels only)
  double d2log(double /*y*/, double z) const {
    if (kind == LikelihoodKind::logistic) {
      const double c = std::cosh(0.5 * z);
      return -0.25 / (c * c);
    }
    return -1.0 / noise_variance;
  }
};

}  // namespace stabsel
