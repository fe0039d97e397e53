#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "stabsel/denoisers.hpp"

namespace stabsel {

// Spectrum of A^T A as atoms (lambda, mass) or an empirical eigenvalue sample
// turned into equal-mass atoms.
struct SpectralMeasure {
  std::vector<std::pair<double, double>> atoms;

  static SpectralMeasure Atoms(std::vector<std::pair<double, double>> atoms);
  static SpectralMeasure Empirical(const Eigen::VectorXd& eigenvalues);

  template <class F>
  double expect(F&& f) const {
    double acc = 0.0;
    for (const auto& [lam, mass] : atoms) acc += mass * f(lam);
    return acc;
  }
  double mean_lambda() const;
};

// alpha delta(lambda - 1) + (1 - alpha) delta(lambda) — the spectrum of A^T A
// for a row-orthogonal A with aspect ratio alpha = M/N
SpectralMeasure row_orthogonal_spectrum(double alpha);

// Bernoulli-Gaussian teacher x0 ~ rho N(0, 1/rho) + (1-rho) delta_0 behind the
// channel q(y|z); T_x = E[x0^2] = 1, T_z = E_lambda[lambda] T_x / alpha.
struct TeacherModel {
  double rho = 0.1;
  Likelihood channel = Likelihood::Logistic();
  double alpha = 0.5;
  double T_x = 1.0;
  double T_z = 1.0;
  double Tz_hat = 1.0;

  static TeacherModel Make(double rho, const Likelihood& channel, double alpha,
                           const SpectralMeasure& spectrum);
};

// One message side of the Gaussian-field order parameters: the field acting
// on a coordinate is mhat * (teacher) + sqrt(chihat) * xi with curvature qhat
// and resampling-noise variance vhat.
struct SeSide {
  double mhat = 0.0, chihat = 0.0, qhat = 1.0, vhat = 1.0;
};

struct SeState {
  SeSide x1, z1, x2, z2;
};

// per-iteration unhatted moments (measurable overlaps)
struct SeMoments {
  double q1x = 0, chi1x = 0, v1x = 0, m1x = 0;
  double q1z = 0, chi1z = 0, v1z = 0, m1z = 0;
  double q2x = 0, chi2x = 0, v2x = 0, m2x = 0;
  double q2z = 0, chi2z = 0, v2z = 0, m2z = 0;
};

struct SeConfig {
  double eps_tol = 1e-10;  // max abs change of the eight side-1 fields
  int t_max = 200;
  double damping = 1.0;
  double qhat_min = 1e-9, qhat_max = 1e9;
  double vhat_max = 1e9, chihat_max = 1e9;
  double vhat_init = 1.0;
  int quad_order = 33;   // inner eta integrals
  int outer_order = 33;  // teacher/field integrals
  PenaltyLaw penalty = PenaltyLaw::TwoPoint(1.0);
  OccupationLaw occupation = OccupationLaw::PoissonMeanOne();
  Likelihood fit_likelihood = Likelihood::Logistic();

  void validate() const;
};

struct SeQuad {
  double q = 0, chi = 0, v = 0, m = 0;
};

// x side: E over x0 and xi ~ N(0,1) of the avg_x_moments at field
// mhat x0 + sqrt(chihat) xi.  q = E[mean^2], chi = E[susc], v = E[var],
// m = E[x0 mean].  (x moments are closed-form, so no inner rule is needed.)
// When vhat is small the integrands have boundary layers at the
// soft-threshold edges; those integrals switch from `outer` to an internal
// composite panel rule pinned at the edges.
SeQuad se_factorized_x(const SeSide& x1, const TeacherModel& teacher, const PenaltyLaw& law,
                       const GaussHermite& outer);

// z side: E over z0 ~ N(0, T_z), y ~ q(y|z0) and xi of avg_z_moments at field
// mhat z0 + sqrt(chihat) xi
SeQuad se_factorized_z(const SeSide& z1, const TeacherModel& teacher, const OccupationLaw& occ,
                       const Likelihood& fit, const GaussHermite& inner,
                       const GaussHermite& outer);

struct SeGaussianOut {
  SeQuad x, z;
};

// spectral averages of the side-2 Gaussian measure; the z-side traces carry
// the 1/alpha normalization (M^{-1} sums versus N^{-1})
SeGaussianOut se_gaussian(const SeState& state, const SpectralMeasure& spectrum,
                          const TeacherModel& teacher);

void se_moment_match_1to2(SeState& state, const SeQuad& xm, const SeQuad& zm,
                          const TeacherModel& teacher, const SeConfig& config);
void se_moment_match_2to1(SeState& state, const SeGaussianOut& g, const TeacherModel& teacher,
                          const SeConfig& config);

struct SeTrajectory {
  std::vector<SeMoments> iterations;
  SeState final_state;
  int n_iterations = 0;
  bool converged = false;
};

SeTrajectory run_se(const TeacherModel& teacher, const SpectralMeasure& spectrum,
                    const SeConfig& config);

}  // namespace stabsel
