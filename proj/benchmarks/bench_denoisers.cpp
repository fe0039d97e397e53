// Scalar denoiser throughput: these kernels dominate the factorized step,
// which is called once per coordinate per iteration.

#include <benchmark/benchmark.h>

#include <random>

#include "stabsel/denoisers.hpp"
#include "stabsel/rng.hpp"

using namespace stabsel;

namespace {

std::mt19937_64 rng = make_rng(1);
std::normal_distribution<double> gauss(0.0, 1.0);

void bm_avg_x_moments(benchmark::State& state) {
  const auto law = PenaltyLaw::TwoPoint(0.6);
  for (auto _ : state) {
    const auto m = avg_x_moments(gauss(rng), 1.3, 0.4, law);
    benchmark::DoNotOptimize(m);
  }
}
BENCHMARK(bm_avg_x_moments);

void bm_avg_x_moments_sharp(benchmark::State& state) {
  // vhat = 0: the single-node branch used by the fixed-resample limit
  const auto law = PenaltyLaw::Deterministic(0.6);
  for (auto _ : state) {
    const auto m = avg_x_moments(gauss(rng), 1.3, 0.0, law);
    benchmark::DoNotOptimize(m);
  }
}
BENCHMARK(bm_avg_x_moments_sharp);

void bm_g1z_logistic(benchmark::State& state) {
  const auto lik = Likelihood::Logistic();
  for (auto _ : state) {
    const double z = g1z(gauss(rng), 1.0, 0.5, 2.0, gauss(rng), 1.0, lik);
    benchmark::DoNotOptimize(z);
  }
}
BENCHMARK(bm_g1z_logistic);

void bm_avg_z_moments_logistic(benchmark::State& state) {
  // poisson occupation x Gauss-Hermite: the expensive inner loop of the
  // factorized z step
  const auto occ = OccupationLaw::PoissonMeanOne();
  const auto lik = Likelihood::Logistic();
  const GaussHermite quad(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    const auto m = avg_z_moments(gauss(rng), 1.0, 0.5, 1.0, occ, quad, lik);
    benchmark::DoNotOptimize(m);
  }
}
BENCHMARK(bm_avg_z_moments_logistic)->Arg(17)->Arg(33)->Arg(49);

void bm_avg_z_moments_gaussian(benchmark::State& state) {
  // the gaussian channel short-circuits the inner optimization
  const auto occ = OccupationLaw::PoissonMeanOne();
  const auto lik = Likelihood::Gaussian(1.0);
  const GaussHermite quad(33);
  for (auto _ : state) {
    const auto m = avg_z_moments(gauss(rng), 1.0, 0.5, 0.3, occ, quad, lik);
    benchmark::DoNotOptimize(m);
  }
}
BENCHMARK(bm_avg_z_moments_gaussian);

void bm_selection_probability(benchmark::State& state) {
  const auto law = PenaltyLaw::TwoPoint(0.6);
  for (auto _ : state) {
    const double pi = selection_probability(gauss(rng), 0.4, law);
    benchmark::DoNotOptimize(pi);
  }
}
BENCHMARK(bm_selection_probability);

}  // namespace

BENCHMARK_MAIN();
