#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace stabsel {

// Law of the randomized l1 penalty gamma.
//   two_point:     gamma in {gamma0, 2 gamma0} with probability 1/2 each
//   deterministic: gamma = gamma0
//   unpenalized:   gamma = 0 (intercept coordinate)
struct PenaltyLaw {
  enum class Variant { two_point, deterministic, unpenalized };
  Variant variant = Variant::two_point;
  double gamma0 = 1.0;

  static PenaltyLaw TwoPoint(double gamma0);
  static PenaltyLaw Deterministic(double gamma0);
  static PenaltyLaw Unpenalized();

  // atoms (gamma, weight); weights sum to 1
  std::vector<std::pair<double, double>> atoms() const;
  double sample(std::mt19937_64& rng) const;
  PenaltyLaw with_gamma0(double g) const;
};

// Law of the resampling occupation number c (how many times an observation
// appears in a bootstrap resample).
//   poisson_mean_one: c ~ Poisson(1) truncated at c_max, renormalized
//   fixed:            c = c_fixed deterministically
struct OccupationLaw {
  enum class Variant { poisson_mean_one, fixed };
  Variant variant = Variant::poisson_mean_one;
  int c_max = 12;
  int c_fixed = 1;

  static OccupationLaw PoissonMeanOne(int c_max = 12);
  static OccupationLaw Fixed(int c);

  // atoms (c, weight) for c = 0..c_max (poisson) or the single fixed atom
  std::vector<std::pair<int, double>> atoms() const;
  int sample(std::mt19937_64& rng) const;
};

}  // namespace stabsel
