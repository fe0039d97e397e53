#include "stabsel/denoisers.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

#include "stabsel/errors.hpp"

namespace stabsel {

namespace {

void check_qv(double qhat, double vhat, const char* who) {
  if (!(qhat > 0.0)) throw std::domain_error(std::string(who) + ": qhat must be > 0");
  if (!(vhat >= 0.0)) throw std::domain_error(std::string(who) + ": vhat must be >= 0");
}

// derivative convention at the threshold: for gamma > 0 the dead zone is
// closed (derivative 0 on |u| <= gamma); for gamma = 0 the map is the
// identity scaled by 1/qhat (derivative 1 everywhere, including u = 0).
double indicator(double u, double gamma) {
  if (gamma == 0.0) return 1.0;
  return std::abs(u) > gamma ? 1.0 : 0.0;
}

// stationarity residual of the z-side maximization: s(z) = u - q z + c dlog
struct ZSolve {
  double z;
  double prime;  // 1 / (q - c d2log(z))
};

ZSolve solve_z(double u, double qhat, double c, double y, const Likelihood& lik) {
  if (lik.kind == LikelihoodKind::gaussian) {
    const double denom = qhat + c / lik.noise_variance;
    const double z = (u + c * y / lik.noise_variance) / denom;
    return {z, 1.0 / denom};
  }
  if (c == 0.0) return {u / qhat, 1.0 / qhat};
  // logistic: |dlog| <= 1 so the root lies in [(u-c)/q, (u+c)/q]
  double lo = (u - c) / qhat - 1e-12;
  double hi = (u + c) / qhat + 1e-12;
  double z = u / qhat;
  if (z < lo || z > hi) z = 0.5 * (lo + hi);
  const double tol = 1e-13 * (1.0 + std::abs(u) + c);
  double s = 0.0, curv = 0.0;
  for (int it = 0; it < 200; ++it) {
    s = u - qhat * z + c * lik.dlog(y, z);
    curv = qhat - c * lik.d2log(y, z);
    if (std::abs(s) <= tol) return {z, 1.0 / curv};
    if (s > 0.0) lo = z; else hi = z;
    double znext = z + s / curv;  // Newton (it <= 50), then bisection
    if (it >= 50 || !(znext > lo && znext < hi)) znext = 0.5 * (lo + hi);
    if (znext == z) return {z, 1.0 / curv};  // bracket exhausted at roundoff
    z = znext;
  }
  throw numeric_error("g1z: Newton/bisection failed to reach stationarity (u=" +
                      std::to_string(u) + ", qhat=" + std::to_string(qhat) +
                      ", c=" + std::to_string(c) + ")");
}

}  // namespace

double g1x(double h, double qhat, double vhat, double gamma, double eta) {
  check_qv(qhat, vhat, "g1x");
  return soft_threshold(h + std::sqrt(vhat) * eta, gamma) / qhat;
}

XMoments avg_x_moments(double h, double qhat, double vhat, const PenaltyLaw& law) {
  check_qv(qhat, vhat, "avg_x_moments");
  if (!std::isfinite(h)) throw numeric_error("avg_x_moments: non-finite field");
  // law of total variance over the penalty atoms: per-atom conditional
  // variance plus mixture spread, each non-negative (and exactly zero in the
  // deterministic vhat = 0 case, so resampling-free runs stay noise-free)
  struct Atom {
    double p, m, v;
  };
  std::vector<Atom> parts;
  parts.reserve(law.atoms().size());
  double mean = 0.0, susc = 0.0;
  if (vhat == 0.0) {
    for (const auto& [g, p] : law.atoms()) {
      const double m = soft_threshold(h, g) / qhat;
      parts.push_back({p, m, 0.0});
      mean += p * m;
      susc += p * indicator(h, g) / qhat;
    }
  } else {
    const double s = std::sqrt(vhat);
    for (const auto& [g, p] : law.atoms()) {
      const double d1 = (h - g) / s, d2 = -(h + g) / s;
      const double C1 = normal_cdf(d1), C2 = normal_cdf(d2);
      const double P1 = normal_pdf(d1), P2 = normal_pdf(d2);
      const double Est = (h - g) * C1 + s * P1 + (h + g) * C2 - s * P2;
      const double Est2 = ((h - g) * (h - g) + vhat) * C1 + s * (h - g) * P1 +
                          ((h + g) * (h + g) + vhat) * C2 - s * (h + g) * P2;
      const double m = Est / qhat;
      parts.push_back({p, m, std::max(0.0, Est2 - Est * Est) / (qhat * qhat)});
      mean += p * m;
      susc += p * (C1 + C2) / qhat;
    }
  }
  XMoments out;
  out.mean = mean;
  out.susceptibility = susc;
  for (const auto& a : parts)
    out.variance += a.p * (a.v + (a.m - mean) * (a.m - mean));
  return out;
}

double g1z(double h, double qhat, double vhat, double c, double eta, double y,
           const Likelihood& lik) {
  check_qv(qhat, vhat, "g1z");
  if (!(c >= 0.0)) throw std::domain_error("g1z: c must be >= 0");
  return solve_z(h + std::sqrt(vhat) * eta, qhat, c, y, lik).z;
}

double g1z_prime(double h, double qhat, double vhat, double c, double eta, double y,
                 const Likelihood& lik) {
  check_qv(qhat, vhat, "g1z_prime");
  if (!(c >= 0.0)) throw std::domain_error("g1z_prime: c must be >= 0");
  return solve_z(h + std::sqrt(vhat) * eta, qhat, c, y, lik).prime;
}

ZMoments avg_z_moments(double h, double qhat, double vhat, double y, const OccupationLaw& occ,
                       const GaussHermite& quad, const Likelihood& lik) {
  check_qv(qhat, vhat, "avg_z_moments");
  if (!std::isfinite(h)) throw numeric_error("avg_z_moments: non-finite field");
  // law of total variance over the occupation atoms (see avg_x_moments)
  struct Atom {
    double p, m, v;
  };
  std::vector<Atom> parts;
  parts.reserve(occ.atoms().size());
  double mean = 0.0, susc = 0.0;
  const double s = std::sqrt(vhat);
  for (const auto& [c, pc] : occ.atoms()) {
    if (c == 0) {
      // g is linear in the field: exact conditional moments
      parts.push_back({pc, h / qhat, vhat / (qhat * qhat)});
      susc += pc / qhat;
    } else if (lik.kind == LikelihoodKind::gaussian) {
      const double denom = qhat + c / lik.noise_variance;
      parts.push_back({pc, (h + c * y / lik.noise_variance) / denom, vhat / (denom * denom)});
      susc += pc / denom;
    } else if (vhat == 0.0) {
      const ZSolve zs = solve_z(h, qhat, c, y, lik);
      parts.push_back({pc, zs.z, 0.0});
      susc += pc * zs.prime;
    } else {
      double m = 0.0, sp = 0.0, m2 = 0.0;
      for (int k = 0; k < quad.nodes.size(); ++k) {
        const ZSolve zs = solve_z(h + s * quad.nodes[k], qhat, c, y, lik);
        const double w = quad.weights[k];
        m += w * zs.z;
        sp += w * zs.prime;
        m2 += w * zs.z * zs.z;
      }
      parts.push_back({pc, m, std::max(0.0, m2 - m * m)});
      susc += pc * sp;
    }
    mean += parts.back().p * parts.back().m;
  }
  ZMoments out;
  out.mean = mean;
  out.susceptibility = susc;
  for (const auto& a : parts)
    out.variance += a.p * (a.v + (a.m - mean) * (a.m - mean));
  return out;
}

double selection_probability(double h, double vhat, const PenaltyLaw& law) {
  if (!(vhat >= 0.0)) throw std::domain_error("selection_probability: vhat must be >= 0");
  if (!std::isfinite(h)) throw numeric_error("selection_probability: non-finite field");
  double pi = 0.0;
  for (const auto& [g, p] : law.atoms()) {
    if (vhat == 0.0) {
      pi += p * indicator(h, g);
    } else if (g == 0.0) {
      pi += p;  // Phi(h/s) + Phi(-h/s) = 1
    } else {
      const double s = std::sqrt(vhat);
      pi += p * (normal_cdf((h - g) / s) + normal_cdf(-(h + g) / s));
    }
  }
  return std::min(1.0, std::max(0.0, pi));
}

}  // namespace stabsel
