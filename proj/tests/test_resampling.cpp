#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <stdexcept>

#include <stabsel/resampling.hpp>

using stabsel::OccupationLaw;
using stabsel::PenaltyLaw;

TEST_CASE("two point penalty atoms") {
  auto law = PenaltyLaw::TwoPoint(0.8);
  auto atoms = law.atoms();
  REQUIRE(atoms.size() == 2);
  CHECK(atoms[0].first == doctest::Approx(0.8));
  CHECK(atoms[0].second == doctest::Approx(0.5));
  CHECK(atoms[1].first == doctest::Approx(1.6));
  CHECK(atoms[1].second == doctest::Approx(0.5));
}

TEST_CASE("deterministic penalty atom") {
  auto law = PenaltyLaw::Deterministic(1.5);
  auto atoms = law.atoms();
  REQUIRE(atoms.size() == 1);
  CHECK(atoms[0].first == doctest::Approx(1.5));
  CHECK(atoms[0].second == doctest::Approx(1.0));
}

TEST_CASE("unpenalized law") {
  auto law = PenaltyLaw::Unpenalized();
  auto atoms = law.atoms();
  REQUIRE(atoms.size() == 1);
  CHECK(atoms[0].first == 0.0);
  CHECK(atoms[0].second == 1.0);
}

TEST_CASE("penalty scale must be positive for random variants") {
  CHECK_THROWS_AS(PenaltyLaw::TwoPoint(0.0), std::domain_error);
  CHECK_THROWS_AS(PenaltyLaw::TwoPoint(-1.0), std::domain_error);
  CHECK_THROWS_AS(PenaltyLaw::Deterministic(-0.5), std::domain_error);
}

TEST_CASE("with_gamma0 rescales") {
  auto law = PenaltyLaw::TwoPoint(1.0).with_gamma0(2.0);
  auto atoms = law.atoms();
  CHECK(atoms[0].first == doctest::Approx(2.0));
  CHECK(atoms[1].first == doctest::Approx(4.0));
}

TEST_CASE("penalty sampling matches atoms") {
  auto law = PenaltyLaw::TwoPoint(1.0);
  std::mt19937_64 rng(7);
  int lo = 0, hi = 0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    double g = law.sample(rng);
    if (std::abs(g - 1.0) < 1e-12)
      ++lo;
    else if (std::abs(g - 2.0) < 1e-12)
      ++hi;
  }
  CHECK(lo + hi == n);
  CHECK(std::abs(lo / double(n) - 0.5) < 0.01);
}

TEST_CASE("occupation weights: unit mean poisson renormalized") {
  auto law = OccupationLaw::PoissonMeanOne(12);
  auto atoms = law.atoms();
  REQUIRE(atoms.size() == 13);
  double total = 0.0;
  for (const auto& a : atoms) total += a.second;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-13));
  // Successive-ratio property of the unit-mean weights: w_{c+1}/w_c = 1/(c+1).
  for (std::size_t c = 0; c + 1 < atoms.size(); ++c) {
    CHECK(atoms[c].first == int(c));
    CHECK(atoms[c + 1].second / atoms[c].second ==
          doctest::Approx(1.0 / double(c + 1)).epsilon(1e-12));
  }
  // Mass forfeited by truncating at 12 is far below every tolerance used in
  // the library.
  double raw_tail = 1.0;
  double term = std::exp(-1.0);
  for (int c = 0; c <= 12; ++c) {
    raw_tail -= term;
    term /= double(c + 1);
  }
  CHECK(std::abs(raw_tail) < 1e-10);
}

TEST_CASE("occupation truncation floor") {
  CHECK_THROWS_AS(OccupationLaw::PoissonMeanOne(7), std::domain_error);
  CHECK_NOTHROW(OccupationLaw::PoissonMeanOne(8));
}

TEST_CASE("fixed occupation") {
  auto law = OccupationLaw::Fixed(3);
  auto atoms = law.atoms();
  REQUIRE(atoms.size() == 1);
  CHECK(atoms[0].first == 3);
  CHECK(atoms[0].second == 1.0);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 10; ++i) CHECK(law.sample(rng) == 3);
  CHECK_THROWS_AS(OccupationLaw::Fixed(-1), std::domain_error);
}

TEST_CASE("occupation sampling matches weights") {
  auto law = OccupationLaw::PoissonMeanOne(12);
  auto atoms = law.atoms();
  std::mt19937_64 rng(42);
  std::map<int, int> counts;
  const int n = 400000;
  for (int i = 0; i < n; ++i) ++counts[law.sample(rng)];
  for (const auto& [c, w] : atoms) {
    if (w < 1e-4) continue;
    double freq = counts[c] / double(n);
    CHECK(std::abs(freq - w) < 5e-3);
  }
}
