// Gaussian-part cost: the M x M kernel path against the direct N x N
// factorization, and the one-time spectral setup of the site-averaged
// variant.  Shapes follow the wide regime M = N/4 where the kernel pays off.

#include <benchmark/benchmark.h>

#include "stabsel/rng.hpp"
#include "stabsel/rvamp.hpp"
#include "stabsel/sa_rvamp.hpp"
#include "stabsel/synthetic.hpp"

using namespace stabsel;

namespace {

struct Instance {
  Dataset data;
  MessageState state;
};

Instance make_instance(int N) {
  const int M = N / 4;
  auto rng = make_rng(42);
  Instance inst;
  inst.data.A = generate_iid_gaussian(M, N, rng);
  inst.data.y = Eigen::VectorXd::Zero(M);
  inst.state = MessageState::init(N, M, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < N; ++i) {
    inst.state.h2x[i] = gauss(rng);
    inst.state.qhat2x[i] = std::exp(0.3 * gauss(rng));
    inst.state.vhat2x[i] = std::exp(0.3 * gauss(rng));
  }
  for (int mu = 0; mu < M; ++mu) {
    inst.state.h2z[mu] = gauss(rng);
    inst.state.qhat2z[mu] = std::exp(0.3 * gauss(rng));
    inst.state.vhat2z[mu] = std::exp(0.3 * gauss(rng));
  }
  return inst;
}

void bm_gaussian_step_kernel(benchmark::State& state) {
  const auto inst = make_instance(static_cast<int>(state.range(0)));
  RvampConfig cfg;
  for (auto _ : state) {
    const auto g = gaussian_step(inst.state, inst.data, cfg);
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(bm_gaussian_step_kernel)->Arg(256)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);

void bm_gaussian_step_direct(benchmark::State& state) {
  const auto inst = make_instance(static_cast<int>(state.range(0)));
  RvampConfig cfg;
  cfg.force_direct = true;
  for (auto _ : state) {
    const auto g = gaussian_step(inst.state, inst.data, cfg);
    benchmark::DoNotOptimize(g);
  }
}
BENCHMARK(bm_gaussian_step_direct)->Arg(256)->Arg(512)->Arg(1024)->Unit(benchmark::kMillisecond);

void bm_sa_spectral_setup(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  auto rng = make_rng(7);
  const Eigen::MatrixXd A = generate_iid_gaussian(N / 4, N, rng);
  for (auto _ : state) {
    const SaGaussianOp op(A);
    benchmark::DoNotOptimize(op.eigenvalues().sum());
  }
}
BENCHMARK(bm_sa_spectral_setup)->Arg(512)->Arg(1024)->Arg(2048)->Unit(benchmark::kMillisecond);

void bm_sa_traces(benchmark::State& state) {
  const int N = static_cast<int>(state.range(0));
  auto rng = make_rng(7);
  const Eigen::MatrixXd A = generate_iid_gaussian(N / 4, N, rng);
  const SaGaussianOp op(A);
  for (auto _ : state) {
    const auto tr = op.traces(1.1, 0.9, 0.8, 0.7);
    benchmark::DoNotOptimize(tr);
  }
}
BENCHMARK(bm_sa_traces)->Arg(512)->Arg(1024)->Arg(2048);

}  // namespace

BENCHMARK_MAIN();
