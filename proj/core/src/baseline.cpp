#include "stabsel/baseline.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>
#include <vector>

#include "stabsel/denoisers.hpp"
#include "stabsel/errors.hpp"
#include "stabsel/rng.hpp"

namespace stabsel {

namespace {

double smooth_objective(const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& c, const Likelihood& lik) {
  double f = 0.0;
  for (int mu = 0; mu < z.size(); ++mu)
    if (c[mu] != 0.0) f -= c[mu] * lik.log_prob(y[mu], z[mu]);
  return f;
}

void smooth_gradient_z(const Eigen::VectorXd& z, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& c, const Likelihood& lik, Eigen::VectorXd& gz) {
  for (int mu = 0; mu < z.size(); ++mu)
    gz[mu] = c[mu] != 0.0 ? -c[mu] * lik.dlog(y[mu], z[mu]) : 0.0;
}

double penalty_term(const Eigen::VectorXd& x, const Eigen::VectorXd& gamma) {
  return gamma.cwiseProduct(x.cwiseAbs()).sum();
}

// spectral norm estimate by a few power iterations on A^T A
double sq_spectral_norm(const Eigen::MatrixXd& A) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(A.cols()).normalized();
  double lam = 0.0;
  for (int it = 0; it < 30; ++it) {
    Eigen::VectorXd w = A.transpose() * (A * v);
    lam = w.norm();
    if (lam == 0.0) return 0.0;
    v = w / lam;
  }
  return lam;
}

}  // namespace

FitResult fit_weighted_l1_glm(const Dataset& data, const Eigen::VectorXd& c,
                              const Eigen::VectorXd& gamma, const Likelihood& lik,
                              const SolverConfig& config) {
  data.validate();
  const int M = data.rows(), N = data.cols();
  if (c.size() != M) throw std::invalid_argument("fit_weighted_l1_glm: c must have M entries");
  if (gamma.size() != N)
    throw std::invalid_argument("fit_weighted_l1_glm: gamma must have N entries");
  if ((c.array() < 0.0).any())
    throw std::invalid_argument("fit_weighted_l1_glm: occupation numbers must be >= 0");
  if ((gamma.array() < 0.0).any())
    throw std::invalid_argument("fit_weighted_l1_glm: penalties must be >= 0");
  if (!(config.tol > 0.0) || config.max_iters < 1)
    throw std::invalid_argument("fit_weighted_l1_glm: bad solver config");

  const double curv = lik.kind == LikelihoodKind::logistic ? 0.25 : 1.0 / lik.noise_variance;
  const double cmax = c.maxCoeff();
  Eigen::VectorXd x = Eigen::VectorXd::Zero(N);
  FitResult res;
  if (cmax == 0.0) {
    // no data terms: the penalized optimum is x = 0
    res.x = x;
    res.objective = 0.0;
    res.converged = true;
    return res;
  }
  const double L = sq_spectral_norm(data.A) * cmax * curv;
  double t = L > 0.0 ? 1.0 / L : 1.0;

  Eigen::VectorXd x_prev = x;
  Eigen::VectorXd z = data.A * x;
  Eigen::VectorXd gz(M), grad(N), w(N), zw(M), u(N);
  double F = smooth_objective(z, data.y, c, lik) + penalty_term(x, gamma);
  double theta = 1.0;

  auto prox_step = [&](const Eigen::VectorXd& point, const Eigen::VectorXd& zpoint,
                       Eigen::VectorXd& out) {
    // backtracking on the quadratic majorization at `point`
    const double fs = smooth_objective(zpoint, data.y, c, lik);
    smooth_gradient_z(zpoint, data.y, c, lik, gz);
    grad.noalias() = data.A.transpose() * gz;
    for (int bt = 0; bt < 80; ++bt) {
      for (int i = 0; i < N; ++i) out[i] = soft_threshold(point[i] - t * grad[i], t * gamma[i]);
      const Eigen::VectorXd diff = out - point;
      const Eigen::VectorXd zout = data.A * out;
      const double fs_out = smooth_objective(zout, data.y, c, lik);
      if (fs_out <= fs + grad.dot(diff) + 0.5 * diff.squaredNorm() / t + 1e-12 * std::abs(fs))
        return fs_out + penalty_term(out, gamma);
      t *= 0.5;
    }
    throw numeric_error("fit_weighted_l1_glm: line search failed (step size underflow)");
  };

  for (int k = 1; k <= config.max_iters; ++k) {
    double F_new;
    if (config.accelerate && theta > 1.0) {
      const double beta = (theta - 1.0) / (0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta)));
      w = x + beta * (x - x_prev);
      zw.noalias() = data.A * w;
      F_new = prox_step(w, zw, u);
      if (F_new > F) {
        // momentum overshot: plain step from x, restart momentum
        zw.noalias() = data.A * x;
        F_new = prox_step(x, zw, u);
        theta = 1.0;
      }
    } else {
      zw.noalias() = data.A * x;
      F_new = prox_step(x, zw, u);
    }
    x_prev.swap(x);
    x = u;
    res.iterations = k;
    const bool done = std::abs(F - F_new) <= config.tol * std::max(1.0, std::abs(F));
    F = std::min(F, F_new);  // monotone by construction; guard roundoff
    theta = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    if (done) {
      res.converged = true;
      break;
    }
  }

  z.noalias() = data.A * x;
  smooth_gradient_z(z, data.y, c, lik, gz);
  grad.noalias() = data.A.transpose() * gz;
  double kkt = 0.0;
  for (int i = 0; i < N; ++i) {
    const double r = x[i] != 0.0 ? std::abs(grad[i] + gamma[i] * (x[i] > 0.0 ? 1.0 : -1.0))
                                 : std::max(0.0, std::abs(grad[i]) - gamma[i]);
    kkt = std::max(kkt, r);
  }
  const double scale = std::max({1.0, grad.cwiseAbs().maxCoeff(), gamma.maxCoeff()});
  res.x = x;
  res.objective = smooth_objective(z, data.y, c, lik) + penalty_term(x, gamma);
  res.kkt_residual = kkt / scale;
  return res;
}

BootstrapResult bootstrap_selection_probability(const Dataset& data, const BootstrapConfig& config,
                                                const Likelihood& lik, const SolverConfig& solver) {
  data.validate();
  if (config.B < 1) throw std::invalid_argument("bootstrap: B must be >= 1");
  if (config.workers < 1) throw std::invalid_argument("bootstrap: workers must be >= 1");
  const int M = data.rows(), N = data.cols();

  auto run_trial = [&](std::uint64_t b, Eigen::VectorXi& counts) -> bool {
    std::mt19937_64 rng = derive_rng(config.seed, b);
    Eigen::VectorXd c(M);
    if (config.multinomial) {
      c.setZero();
      std::uniform_int_distribution<int> pick(0, M - 1);
      for (int k = 0; k < M; ++k) c[pick(rng)] += 1.0;
    } else {
      for (int mu = 0; mu < M; ++mu) c[mu] = static_cast<double>(config.occupation.sample(rng));
    }
    Eigen::VectorXd gamma(N);
    for (int i = 0; i < N; ++i)
      gamma[i] = (data.has_intercept && i == 0) ? 0.0 : config.penalty.sample(rng);
    FitResult fit;
    try {
      fit = fit_weighted_l1_glm(data, c, gamma, lik, solver);
    } catch (const std::exception&) {
      return false;
    }
    if (!fit.converged) return false;
    const double thresh = config.support_rtol * std::max(1.0, fit.x.cwiseAbs().maxCoeff());
    for (int i = 0; i < N; ++i)
      if (std::abs(fit.x[i]) > thresh) ++counts[i];
    return true;
  };

  const int W = std::min(config.workers, config.B);
  std::vector<Eigen::VectorXi> counts(W, Eigen::VectorXi::Zero(N));
  std::vector<int> fails(W, 0);
  if (W == 1) {
    for (int b = 0; b < config.B; ++b)
      if (!run_trial(b, counts[0])) ++fails[0];
  } else {
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    pool.reserve(W);
    for (int w = 0; w < W; ++w)
      pool.emplace_back([&, w] {
        for (int b = next.fetch_add(1); b < config.B; b = next.fetch_add(1))
          if (!run_trial(b, counts[w])) ++fails[w];
      });
    for (auto& th : pool) th.join();
  }

  BootstrapResult res;
  res.counts = Eigen::VectorXi::Zero(N);
  for (int w = 0; w < W; ++w) {
    res.counts += counts[w];
    res.fit_failures += fails[w];
  }
  res.trials_used = config.B - res.fit_failures;
  if (res.fit_failures > config.max_failure_fraction * config.B)
    throw numeric_error("bootstrap: " + std::to_string(res.fit_failures) + " of " +
                        std::to_string(config.B) + " fits failed");
  if (res.trials_used == 0) throw numeric_error("bootstrap: no successful fits");
  res.pi = res.counts.cast<double>() / res.trials_used;
  res.std_err = (res.pi.array() * (1.0 - res.pi.array()) / res.trials_used).sqrt();
  return res;
}

}  // namespace stabsel
