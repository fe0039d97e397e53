#pragma once

#include "stabsel/likelihood.hpp"
#include "stabsel/quadrature.hpp"
#include "stabsel/resampling.hpp"

namespace stabsel {

inline double normal_pdf(double x) { return std::exp(-0.5 * x * x) * 0.3989422804014326779; }
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

inline double soft_threshold(double u, double gamma) {
  if (u > gamma) return u - gamma;
  if (u < -gamma) return u + gamma;
  return 0.0;
}

struct XMoments {
  double mean = 0.0;
  double susceptibility = 0.0;  // E d/dh, >= 0
  double variance = 0.0;        // E[g^2] - mean^2, >= 0
};
struct ZMoments {
  double mean = 0.0;
  double susceptibility = 0.0;
  double variance = 0.0;
};

// x-side scalar denoiser: g1x = ST(h + sqrt(vhat) eta, gamma) / qhat
double g1x(double h, double qhat, double vhat, double gamma, double eta);

// Closed-form Gaussian-smoothed moments of g1x under eta ~ N(0,1) and the
// penalty law.  With s = sqrt(vhat), d1 = (h-gamma)/s, d2 = -(h+gamma)/s:
//   E[ST]   = (h-g) Phi(d1) + s phi(d1) + (h+g) Phi(d2) - s phi(d2)
//   E[1(.)] = Phi(d1) + Phi(d2)
//   E[ST^2] = ((h-g)^2+s^2) Phi(d1) + s(h-g) phi(d1)
//           + ((h+g)^2+s^2) Phi(d2) - s(h+g) phi(d2)
// vhat = 0 degenerates to the pointwise evaluation at eta = 0.
XMoments avg_x_moments(double h, double qhat, double vhat, const PenaltyLaw& law);

// z-side scalar denoiser: the maximizer of
//   -qhat z^2/2 + (h + sqrt(vhat) eta) z + c log p(y|z).
// Safeguarded Newton (bracketed) with bisection fallback; gaussian channel
// and c = 0 have closed forms.
double g1z(double h, double qhat, double vhat, double c, double eta, double y,
           const Likelihood& lik);

// d g1z / dh = [qhat - c d2/dz2 log p(y|z*)]^{-1}
double g1z_prime(double h, double qhat, double vhat, double c, double eta, double y,
                 const Likelihood& lik);

// Moments of g1z under eta ~ N(0,1) (Gauss-Hermite) and the occupation law.
ZMoments avg_z_moments(double h, double qhat, double vhat, double y, const OccupationLaw& occ,
                       const GaussHermite& quad, const Likelihood& lik);

// Pi = E_gamma[ Phi((h-gamma)/sqrt(vhat)) + Phi(-(h+gamma)/sqrt(vhat)) ];
// vhat = 0 degenerates to E_gamma[ 1(|h| > gamma) ].  Unpenalized law gives 1.
double selection_probability(double h, double vhat, const PenaltyLaw& law);

}  // namespace stabsel
