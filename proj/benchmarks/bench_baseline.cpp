// End-to-end cost of one message-passing fixed point against one
// proximal-gradient fit: the x-axis of the "one run replaces B refits"
// trade-off.

#include <benchmark/benchmark.h>

#include "stabsel/baseline.hpp"
#include "stabsel/rng.hpp"
#include "stabsel/rvamp.hpp"
#include "stabsel/synthetic.hpp"

using namespace stabsel;

namespace {

Dataset make_data(int N, std::uint64_t seed) {
  auto rng = make_rng(seed);
  Dataset d;
  d.A = generate_iid_gaussian(N / 2, N, rng);
  const Eigen::VectorXd x0 = generate_signal(N, 0.1, rng);
  d.y = generate_responses(d.A, x0, Likelihood::Logistic(), rng);
  return d;
}

void bm_run_rvamp(benchmark::State& state) {
  const Dataset d = make_data(static_cast<int>(state.range(0)), 11);
  RvampConfig cfg;
  cfg.penalty = PenaltyLaw::TwoPoint(0.1);
  for (auto _ : state) {
    const auto res = run_rvamp(d, cfg);
    benchmark::DoNotOptimize(res.pi);
  }
}
BENCHMARK(bm_run_rvamp)->Arg(200)->Arg(400)->Arg(800)->Unit(benchmark::kMillisecond);

void bm_single_fit(benchmark::State& state) {
  const Dataset d = make_data(static_cast<int>(state.range(0)), 11);
  const int M = d.rows(), N = d.cols();
  const Eigen::VectorXd c = Eigen::VectorXd::Ones(M);
  const Eigen::VectorXd gamma = Eigen::VectorXd::Constant(N, 0.1);
  const auto lik = Likelihood::Logistic();
  for (auto _ : state) {
    const auto fit = fit_weighted_l1_glm(d, c, gamma, lik);
    benchmark::DoNotOptimize(fit.x);
  }
}
BENCHMARK(bm_single_fit)->Arg(200)->Arg(400)->Arg(800)->Unit(benchmark::kMillisecond);

void bm_bootstrap_100(benchmark::State& state) {
  const Dataset d = make_data(static_cast<int>(state.range(0)), 11);
  BootstrapConfig bc;
  bc.B = 100;
  bc.seed = 3;
  bc.penalty = PenaltyLaw::TwoPoint(0.1);
  const auto lik = Likelihood::Logistic();
  for (auto _ : state) {
    const auto res = bootstrap_selection_probability(d, bc, lik);
    benchmark::DoNotOptimize(res.pi);
  }
}
BENCHMARK(bm_bootstrap_100)->Arg(200)->Arg(400)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
