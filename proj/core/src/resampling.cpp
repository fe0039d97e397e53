#include "stabsel/resampling.hpp"

#include <cmath>
#include <stdexcept>

namespace stabsel {

PenaltyLaw PenaltyLaw::TwoPoint(double gamma0) {
  if (!(gamma0 > 0.0)) throw std::domain_error("PenaltyLaw: gamma0 must be > 0");
  return {Variant::two_point, gamma0};
}

PenaltyLaw PenaltyLaw::Deterministic(double gamma0) {
  if (!(gamma0 > 0.0)) throw std::domain_error("PenaltyLaw: gamma0 must be > 0");
  return {Variant::deterministic, gamma0};
}

PenaltyLaw PenaltyLaw::Unpenalized() { return {Variant::unpenalized, 0.0}; }

std::vector<std::pair<double, double>> PenaltyLaw::atoms() const {
  switch (variant) {
    case Variant::two_point:
      return {{gamma0, 0.5}, {2.0 * gamma0, 0.5}};
    case Variant::deterministic:
      return {{gamma0, 1.0}};
    case Variant::unpenalized:
      return {{0.0, 1.0}};
  }
  throw std::logic_error("PenaltyLaw: unknown variant");
}

double PenaltyLaw::sample(std::mt19937_64& rng) const {
  if (variant == Variant::two_point) {
    std::bernoulli_distribution flip(0.5);
    return flip(rng) ? 2.0 * gamma0 : gamma0;
  }
  return variant == Variant::deterministic ? gamma0 : 0.0;
}

PenaltyLaw PenaltyLaw::with_gamma0(double g) const {
  if (variant == Variant::unpenalized) return *this;
  PenaltyLaw out = *this;
  if (!(g > 0.0)) throw std::domain_error("PenaltyLaw: gamma0 must be > 0");
  out.gamma0 = g;
  return out;
}

OccupationLaw OccupationLaw::PoissonMeanOne(int c_max) {
  if (c_max < 8) throw std::domain_error("OccupationLaw: c_max must be >= 8");
  return {Variant::poisson_mean_one, c_max, 1};
}

OccupationLaw OccupationLaw::Fixed(int c) {
  if (c < 0) throw std::domain_error("OccupationLaw: fixed c must be >= 0");
  return {Variant::fixed, 12, c};
}

std::vector<std::pair<int, double>> OccupationLaw::atoms() const {
  if (variant == Variant::fixed) return {{c_fixed, 1.0}};
  // p(c) = e^{-1}/c!, truncated at c_max and renormalized
  std::vector<std::pair<int, double>> out;
  out.reserve(c_max + 1);
  double w = std::exp(-1.0), total = 0.0;
  for (int c = 0; c <= c_max; ++c) {
    out.emplace_back(c, w);
    total += w;
    w /= (c + 1);
  }
  for (auto& [c, p] : out) p /= total;
  return out;
}

int OccupationLaw::sample(std::mt19937_64& rng) const {
  if (variant == Variant::fixed) return c_fixed;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double u = unif(rng), acc = 0.0;
  auto table = atoms();
  for (const auto& [c, p] : table) {
    acc += p;
    if (u <= acc) return c;
  }
  return c_max;
}

}  // namespace stabsel
