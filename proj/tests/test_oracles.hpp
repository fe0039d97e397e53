#pragma once
// Brute-force reference implementations used only by the tests. They are
// deliberately independent of the library code paths they cross-check:
// Monte Carlo averaging instead of closed forms, bisection instead of Newton.

#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>

#include <stabsel/likelihood.hpp>
#include <stabsel/resampling.hpp>

namespace oracle {

struct mc_estimate {
  double mean = 0.0;
  double std_err = 0.0;
};

// Sample average of f(eta, gamma, c) over eta ~ N(0,1) and the resampling laws.
inline mc_estimate mc_average(const std::function<double(double, double, int)>& f,
                              const stabsel::PenaltyLaw& penalty,
                              const stabsel::OccupationLaw& occupation,
                              std::size_t n_samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double eta = gauss(rng);
    const double gamma = penalty.sample(rng);
    const int c = occupation.sample(rng);
    const double v = f(eta, gamma, c);
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(n_samples);
  const double mean = sum / n;
  const double var = std::max(0.0, sum_sq / n - mean * mean);
  return {mean, std::sqrt(var / n)};
}

// Derivative-free maximizer of phi(z) = -qhat z^2/2 + u z + c log p(y|z)
// via golden-section search on a wide bracket. Slow but has no code in
// common with the Newton solver it validates.
inline double maximize_scalar(const std::function<double(double)>& phi, double lo,
                              double hi) {
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  double fc = phi(c), fd = phi(d);
  for (int it = 0; it < 400 && (b - a) > 1e-14 * (1.0 + std::abs(a) + std::abs(b));
       ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = phi(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = phi(d);
    }
  }
  return 0.5 * (a + b);
}

inline double golden_g1z(double h, double qhat, double vhat, int c, double eta,
                         double y, const stabsel::Likelihood& lik) {
  const double u = h + std::sqrt(vhat) * eta;
  auto phi = [&](double z) {
    return -0.5 * qhat * z * z + u * z +
           (c > 0 ? c * lik.log_prob(y, z) : 0.0);
  };
  const double r = (std::abs(u) + c + 1.0) / qhat + 1.0;
  return maximize_scalar(phi, -r, r);
}

}  // namespace oracle
