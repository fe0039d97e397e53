#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "stabsel/dataset.hpp"
#include "stabsel/likelihood.hpp"
#include "stabsel/resampling.hpp"

namespace stabsel {

struct SolverConfig {
  double tol = 1e-10;       // relative objective decrease between accepted iterates
  int max_iters = 100000;
  bool accelerate = true;   // Nesterov momentum with a monotone (objective) guard
};

struct FitResult {
  Eigen::VectorXd x;
  double objective = 0.0;
  double kkt_residual = 0.0;  // scaled subgradient optimality residual
  int iterations = 0;
  bool converged = false;
};

// Minimizes  f(x) = -sum_mu c_mu log p(y_mu | a_mu^T x) + sum_i gamma_i |x_i|
// by proximal gradient with backtracking line search.  Objective is monotone
// non-increasing across iterations (momentum steps are objective-guarded).
FitResult fit_weighted_l1_glm(const Dataset& data, const Eigen::VectorXd& c,
                              const Eigen::VectorXd& gamma, const Likelihood& lik,
                              const SolverConfig& config = {});

struct BootstrapConfig {
  int B = 1000;
  std::uint64_t seed = 0;
  OccupationLaw occupation = OccupationLaw::PoissonMeanOne();
  PenaltyLaw penalty = PenaltyLaw::TwoPoint(1.0);
  bool multinomial = false;  // exact multinomial resampling instead of the occupation law
  int workers = 1;
  double support_rtol = 1e-10;         // selected iff |x_i| > support_rtol * max(1, ||x||_inf)
  double max_failure_fraction = 0.01;  // more failed fits than this aborts
};

struct BootstrapResult {
  Eigen::VectorXd pi;
  Eigen::VectorXd std_err;  // sqrt(pi (1-pi) / trials_used)
  Eigen::VectorXi counts;
  int trials_used = 0;
  int fit_failures = 0;
};

// Naive stability selection: B independent (c, gamma) resamples, one solver
// fit each, count the support.  Per-trial RNG streams derive from (seed, b),
// so results do not depend on worker count or scheduling.
BootstrapResult bootstrap_selection_probability(const Dataset& data, const BootstrapConfig& config,
                                                const Likelihood& lik,
                                                const SolverConfig& solver = {});

}  // namespace stabsel
