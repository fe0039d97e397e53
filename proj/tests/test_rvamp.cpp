#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include <stabsel/baseline.hpp>
#include <stabsel/errors.hpp>
#include <stabsel/rng.hpp>
#include <stabsel/rvamp.hpp>
#include <stabsel/synthetic.hpp>

using namespace stabsel;

namespace {

Dataset logistic_problem(int M, int N, double rho, std::uint64_t seed, bool row_orth = false) {
  auto rng = make_rng(seed);
  Dataset d;
  d.A = row_orth ? generate_row_orthogonal(M, N, rng) : generate_iid_gaussian(M, N, rng);
  Eigen::VectorXd x0 = generate_signal(N, rho, rng);
  d.y = generate_responses(d.A, x0, Likelihood::Logistic(), rng);
  return d;
}

// dense reference for everything the Woodbury kernel produces
struct DenseRef {
  Eigen::MatrixXd X, AX, AXAt;
  DenseRef(const Eigen::MatrixXd& A, const Eigen::VectorXd& qx, const Eigen::VectorXd& qz) {
    Eigen::MatrixXd H = A.transpose() * qz.asDiagonal() * A;
    H.diagonal() += qx;
    X = H.llt().solve(Eigen::MatrixXd::Identity(A.cols(), A.cols()));
    AX = A * X;
    AXAt = AX * A.transpose();
  }
};

}  // namespace

TEST_CASE("moment matching solves for the complementary natural parameters") {
  MessageState s = MessageState::init(1, 1, 0.5);
  s.h1x[0] = 1.0;
  s.qhat1x[0] = 1.0;
  s.vhat1x[0] = 0.5;
  s.h1z[0] = -2.0;
  s.qhat1z[0] = 2.0;
  s.vhat1z[0] = 0.25;

  FactorizedMoments f;
  f.xhat1 = Eigen::VectorXd::Constant(1, 1.0);
  f.chi1x = Eigen::VectorXd::Constant(1, 0.5);
  f.v1x = Eigen::VectorXd::Constant(1, 0.25);
  f.zhat1 = Eigen::VectorXd::Constant(1, 0.5);
  f.chi1z = Eigen::VectorXd::Constant(1, 0.25);
  f.v1z = Eigen::VectorXd::Constant(1, 0.125);

  RvampConfig cfg;
  IterationDiagnostics diag;
  moment_match_1to2(s, f, cfg, diag);
  // x: 1/0.5 - 1 = 1, 1/0.5 - 1 = 1, 0.25/0.25 - 0.5 = 0.5
  CHECK(s.h2x[0] == doctest::Approx(1.0));
  CHECK(s.qhat2x[0] == doctest::Approx(1.0));
  CHECK(s.vhat2x[0] == doctest::Approx(0.5));
  // z: 0.5/0.25 - (-2) = 4, 1/0.25 - 2 = 2, 0.125/0.0625 - 0.25 = 1.75
  CHECK(s.h2z[0] == doctest::Approx(4.0));
  CHECK(s.qhat2z[0] == doctest::Approx(2.0));
  CHECK(s.vhat2z[0] == doctest::Approx(1.75));
  CHECK(diag.pinned == 0);
  CHECK(diag.clamped_qhat == 0);
  CHECK(diag.clamped_vhat == 0);
}

TEST_CASE("moment matching clamps the precision window") {
  MessageState s = MessageState::init(1, 1, 0.0);
  s.qhat1x[0] = 1.2;  // 1/chi - qhat_old < 0 forces the lower clamp
  FactorizedMoments f;
  f.xhat1 = Eigen::VectorXd::Constant(1, 0.9);
  f.chi1x = Eigen::VectorXd::Constant(1, 0.9);
  f.v1x = Eigen::VectorXd::Zero(1);
  f.zhat1 = Eigen::VectorXd::Constant(1, 1.0);
  f.chi1z = Eigen::VectorXd::Constant(1, 0.4);  // 1/chi - qhat_old interior
  f.v1z = Eigen::VectorXd::Zero(1);

  RvampConfig cfg;
  IterationDiagnostics diag;
  moment_match_1to2(s, f, cfg, diag);
  CHECK(s.qhat2x[0] == cfg.qhat_min);
  CHECK(diag.clamped_qhat == 1);
}

TEST_CASE("zero susceptibility pins the coordinate") {
  MessageState s = MessageState::init(2, 1, 0.0);
  s.h1x[0] = 0.3;
  FactorizedMoments f;
  f.xhat1 = Eigen::VectorXd::Zero(2);
  f.chi1x = Eigen::VectorXd::Zero(2);
  f.v1x = Eigen::VectorXd::Zero(2);
  f.xhat1[1] = 0.5;
  f.chi1x[1] = 0.5;
  f.zhat1 = Eigen::VectorXd::Constant(1, 1.0);
  f.chi1z = Eigen::VectorXd::Constant(1, 1.0);
  f.v1z = Eigen::VectorXd::Zero(1);

  RvampConfig cfg;
  IterationDiagnostics diag;
  moment_match_1to2(s, f, cfg, diag);
  CHECK(s.h2x[0] == doctest::Approx(-0.3));  // cancels the incoming field
  CHECK(s.qhat2x[0] == cfg.qhat_max);
  CHECK(s.vhat2x[0] == 0.0);
  CHECK(diag.pinned == 1);

  // zero susceptibility with a nonzero mean is a genuine inconsistency
  f.xhat1[0] = 0.1;
  CHECK_THROWS_AS(moment_match_1to2(s, f, cfg, diag), numeric_error);
}

TEST_CASE("woodbury kernel against the dense inverse") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> uq(0.2, 5.0), uv(0.0, 2.0);
  std::normal_distribution<double> gauss;
  for (int rep = 0; rep < 20; ++rep) {
    const int M = 4 + rep % 5, N = 12 + rep % 9;
    Eigen::MatrixXd A = Eigen::MatrixXd::NullaryExpr(M, N, [&](int, int) { return gauss(rng); });
    Eigen::VectorXd qx = Eigen::VectorXd::NullaryExpr(N, [&](int) { return uq(rng); });
    Eigen::VectorXd qz = Eigen::VectorXd::NullaryExpr(M, [&](int) { return uq(rng); });
    Eigen::VectorXd vx = Eigen::VectorXd::NullaryExpr(N, [&](int) { return uv(rng); });
    Eigen::VectorXd vz = Eigen::VectorXd::NullaryExpr(M, [&](int) { return uv(rng); });
    Eigen::VectorXd r = Eigen::VectorXd::NullaryExpr(N, [&](int) { return gauss(rng); });

    WoodburyOp op(A, qx, qz);
    DenseRef ref(A, qx, qz);

    CHECK((op.apply(r) - ref.X * r).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((op.diag_X() - ref.X.diagonal()).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((op.diag_AXAt() - ref.AXAt.diagonal()).cwiseAbs().maxCoeff() < 1e-10);

    Eigen::VectorXd v2x, v2z;
    op.v_diagonals(vx, vz, v2x, v2z);
    Eigen::VectorXd rx(N), rz(M);
    for (int i = 0; i < N; ++i)
      rx[i] = ref.X.row(i).cwiseAbs2().dot(vx) + ref.AX.col(i).cwiseAbs2().dot(vz);
    for (int mu = 0; mu < M; ++mu)
      rz[mu] = ref.AX.row(mu).cwiseAbs2().dot(vx) + ref.AXAt.row(mu).cwiseAbs2().dot(vz);
    CHECK((v2x - rx).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((v2z - rz).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("woodbury input validation") {
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(3, 5);
  CHECK_THROWS_AS(WoodburyOp(A, Eigen::VectorXd::Ones(4), Eigen::VectorXd::Ones(3)),
                  std::invalid_argument);
  Eigen::VectorXd bad = Eigen::VectorXd::Ones(5);
  bad[2] = 0.0;
  CHECK_THROWS_AS(WoodburyOp(A, bad, Eigen::VectorXd::Ones(3)), numeric_error);
}

TEST_CASE("gaussian step fast path equals the direct path") {
  Dataset d = logistic_problem(12, 30, 0.3, 7);
  MessageState s = MessageState::init(30, 12, 1.0);
  auto rng = make_rng(8);
  std::uniform_real_distribution<double> uq(0.3, 3.0), uv(0.0, 1.5);
  std::normal_distribution<double> gauss;
  for (int i = 0; i < 30; ++i) {
    s.h2x[i] = gauss(rng);
    s.qhat2x[i] = uq(rng);
    s.vhat2x[i] = uv(rng);
  }
  for (int mu = 0; mu < 12; ++mu) {
    s.h2z[mu] = gauss(rng);
    s.qhat2z[mu] = uq(rng);
    s.vhat2z[mu] = uv(rng);
  }
  RvampConfig fast, direct;
  direct.force_direct = true;
  auto a = gaussian_step(s, d, fast);
  auto b = gaussian_step(s, d, direct);
  CHECK((a.xhat2 - b.xhat2).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((a.zhat2 - b.zhat2).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((a.chi2x - b.chi2x).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((a.chi2z - b.chi2z).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((a.v2x - b.v2x).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((a.v2z - b.v2z).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("no resampling noise reduces to the penalized glm solution") {
  // fixed occupation 1 + deterministic penalty + vhat_init 0: the resampling
  // channel is off, and the fixed point is the l1-penalized MLE
  for (bool wide : {false, true}) {
    const int M = wide ? 25 : 60, N = wide ? 50 : 40;
    Dataset d = logistic_problem(M, N, 0.3, wide ? 11 : 12);
    RvampConfig cfg;
    cfg.occupation = OccupationLaw::Fixed(1);
    cfg.penalty = PenaltyLaw::Deterministic(0.15);
    cfg.vhat_init = 0.0;
    cfg.eps_tol = 1e-12;
    cfg.damping = wide ? 0.7 : 1.0;
    cfg.t_max = 2000;
    auto res = run_rvamp(d, cfg);
    REQUIRE(res.converged);
    CHECK(res.vhat1x.cwiseAbs().maxCoeff() == 0.0);

    SolverConfig scfg;
    scfg.tol = 1e-14;
    auto ref = fit_weighted_l1_glm(d, Eigen::VectorXd::Ones(M),
                                   Eigen::VectorXd::Constant(N, 0.15), Likelihood::Logistic(),
                                   scfg);
    REQUIRE(ref.converged);
    CHECK((res.xhat1 - ref.x).cwiseAbs().maxCoeff() < 1e-5);
    // with vhat = 0 the selection probability is the support indicator
    for (int i = 0; i < N; ++i) {
      const bool in_support = std::abs(ref.x[i]) > 1e-7;
      if (std::abs(ref.x[i]) > 1e-7 || std::abs(ref.x[i]) < 1e-12)  // skip borderline
        CHECK(res.pi[i] == (in_support ? 1.0 : 0.0));
    }
  }
}

TEST_CASE("gaussian channel with identity design has an analytic fixed point") {
  // A = I, gaussian likelihood, no penalty randomness, c = 1:
  // the fixed point solves the scalar lasso x = ST(y, gamma)
  const int N = 15;
  auto rng = make_rng(14);
  Dataset d;
  d.A = Eigen::MatrixXd::Identity(N, N);
  d.y = Eigen::VectorXd::NullaryExpr(N, [&](int) {
    return std::normal_distribution<double>(0.0, 2.0)(rng);
  });
  RvampConfig cfg;
  cfg.likelihood = Likelihood::Gaussian(1.0);
  cfg.occupation = OccupationLaw::Fixed(1);
  cfg.penalty = PenaltyLaw::Deterministic(0.5);
  cfg.vhat_init = 0.0;
  cfg.eps_tol = 1e-14;
  cfg.t_max = 500;
  auto res = run_rvamp(d, cfg);
  REQUIRE(res.converged);
  for (int i = 0; i < N; ++i)
    CHECK(res.xhat1[i] == doctest::Approx(soft_threshold(d.y[i], 0.5)).epsilon(1e-6));
}

TEST_CASE("converged state is a fixed point of one more sweep") {
  Dataset d = logistic_problem(30, 50, 0.25, 21);
  RvampConfig cfg;
  const double g0 = 0.3 * (d.A.transpose() * d.y).cwiseAbs().maxCoeff();
  cfg.penalty = PenaltyLaw::TwoPoint(g0);
  cfg.eps_tol = 1e-12;
  cfg.t_max = 1000;
  auto res = run_rvamp(d, cfg);
  REQUIRE(res.converged);

  MessageState state = res.final_state;
  const GaussHermite quad(cfg.quad_order);
  IterationDiagnostics diag;
  const FactorizedMoments f = factorized_step(state, d, cfg, quad);
  moment_match_1to2(state, f, cfg, diag);
  const GaussianMoments g = gaussian_step(state, d, cfg);
  const double crit = std::max((f.xhat1 - g.xhat2).squaredNorm() / d.cols(),
                               (f.zhat1 - g.zhat2).squaredNorm() / d.rows());
  CHECK(crit < 100.0 * cfg.eps_tol);
  // criterion decreased along the run
  CHECK(res.criterion_trace.back() < res.criterion_trace.front());
}

TEST_CASE("damping reaches the same fixed point") {
  Dataset d = logistic_problem(24, 40, 0.3, 33);
  const double g0 = 0.35 * (d.A.transpose() * d.y).cwiseAbs().maxCoeff();
  RvampConfig plain;
  plain.penalty = PenaltyLaw::TwoPoint(g0);
  plain.eps_tol = 1e-12;
  plain.t_max = 2000;
  RvampConfig damped = plain;
  damped.damping = 0.5;
  auto a = run_rvamp(d, plain);
  auto b = run_rvamp(d, damped);
  REQUIRE(a.converged);
  REQUIRE(b.converged);
  CHECK((a.pi - b.pi).cwiseAbs().maxCoeff() < 1e-4);
  CHECK((a.xhat1 - b.xhat1).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("runs are deterministic") {
  Dataset d = logistic_problem(20, 35, 0.3, 44);
  RvampConfig cfg;
  cfg.penalty = PenaltyLaw::TwoPoint(0.25 * (d.A.transpose() * d.y).cwiseAbs().maxCoeff());
  cfg.t_max = 300;
  auto a = run_rvamp(d, cfg);
  auto b = run_rvamp(d, cfg);
  CHECK(a.iterations == b.iterations);
  CHECK((a.pi.array() == b.pi.array()).all());
  CHECK((a.xhat1.array() == b.xhat1.array()).all());
  CHECK(a.criterion_trace == b.criterion_trace);
}

TEST_CASE("intercept column is reported selected with certainty") {
  auto rng = make_rng(55);
  const int M = 40, N = 10;
  Dataset d;
  d.A.resize(M, N);
  d.A.col(0).setOnes();
  d.A.rightCols(N - 1) = generate_iid_gaussian(M, N - 1, rng);
  d.has_intercept = true;
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(N);
  x0[0] = 1.0;
  x0[2] = 2.0;
  d.y = generate_responses(d.A, x0, Likelihood::Logistic(), rng);

  RvampConfig cfg;
  cfg.penalty = PenaltyLaw::TwoPoint(0.2);
  cfg.damping = 0.7;
  cfg.t_max = 1000;
  auto res = run_rvamp(d, cfg);
  REQUIRE(res.converged);
  CHECK(res.pi[0] == 1.0);
  for (int i = 1; i < N; ++i) {
    CHECK(res.pi[i] >= 0.0);
    CHECK(res.pi[i] <= 1.0);
  }
}

TEST_CASE("config and init validation") {
  Dataset d = logistic_problem(10, 20, 0.5, 66);
  RvampConfig cfg;
  cfg.eps_tol = 0.0;
  CHECK_THROWS_AS(run_rvamp(d, cfg), std::invalid_argument);
  cfg = RvampConfig{};
  cfg.damping = 1.5;
  CHECK_THROWS_AS(run_rvamp(d, cfg), std::invalid_argument);
  cfg = RvampConfig{};
  cfg.qhat_min = 0.0;
  CHECK_THROWS_AS(run_rvamp(d, cfg), std::invalid_argument);
  cfg = RvampConfig{};
  MessageState wrong = MessageState::init(5, 10, 1.0);
  CHECK_THROWS_AS(run_rvamp(d, cfg, &wrong), std::invalid_argument);
}

TEST_CASE("default gamma grid is log spaced and descending") {
  Dataset d = logistic_problem(15, 25, 0.4, 77);
  auto grid = default_gamma_grid(d, 12, 0.01);
  REQUIRE(grid.size() == 12);
  const double gmax = (d.A.transpose() * d.y).cwiseAbs().maxCoeff();
  CHECK(grid.front() == doctest::Approx(gmax));
  CHECK(grid.back() == doctest::Approx(gmax * 0.01));
  for (size_t k = 1; k < grid.size(); ++k) {
    CHECK(grid[k] < grid[k - 1]);
    const double ratio = grid[k] / grid[k - 1];
    CHECK(ratio == doctest::Approx(grid[1] / grid[0]).epsilon(1e-12));
  }
  CHECK(default_gamma_grid(d, 1, 0.5).size() == 1);
  CHECK_THROWS_AS(default_gamma_grid(d, 0, 0.1), std::invalid_argument);
  CHECK_THROWS_AS(default_gamma_grid(d, 5, 1.5), std::invalid_argument);

  Dataset null = d;
  null.y.setZero();
  CHECK_THROWS_AS(default_gamma_grid(null, 5, 0.1), std::invalid_argument);
}

TEST_CASE("selection path single point equals a direct run") {
  Dataset d = logistic_problem(20, 30, 0.3, 88);
  const double g0 = 0.3 * (d.A.transpose() * d.y).cwiseAbs().maxCoeff();
  RvampConfig cfg;
  cfg.t_max = 500;
  auto path = selection_path(d, {g0}, cfg);
  REQUIRE(path.points.size() == 1);
  REQUIRE_FALSE(path.points[0].failed);
  REQUIRE(path.points[0].converged);

  RvampConfig one = cfg;
  one.penalty = cfg.penalty.with_gamma0(g0);
  auto direct = run_rvamp(d, one);
  CHECK((path.points[0].pi.array() == direct.pi.array()).all());
  CHECK(path.points[0].iterations == direct.iterations);
  CHECK(path.points[0].gamma0 == g0);
}

TEST_CASE("warm started path matches the cold path and saves iterations") {
  Dataset d = logistic_problem(25, 40, 0.3, 99);
  auto grid = default_gamma_grid(d, 8, 0.05);
  RvampConfig cfg;
  cfg.t_max = 2000;
  cfg.damping = 0.8;
  auto warm = selection_path(d, grid, cfg, true);
  auto cold = selection_path(d, grid, cfg, false);
  REQUIRE(warm.points.size() == 8);
  long warm_iters = 0, cold_iters = 0;
  for (size_t k = 0; k < 8; ++k) {
    REQUIRE_FALSE(warm.points[k].failed);
    REQUIRE_FALSE(cold.points[k].failed);
    REQUIRE(warm.points[k].converged);
    REQUIRE(cold.points[k].converged);
    CHECK((warm.points[k].pi - cold.points[k].pi).cwiseAbs().maxCoeff() < 1e-3);
    warm_iters += warm.points[k].iterations;
    cold_iters += cold.points[k].iterations;
  }
  CHECK(warm_iters <= cold_iters);

  CHECK_THROWS_AS(selection_path(d, {}, cfg), std::invalid_argument);
  CHECK_THROWS_AS(selection_path(d, {0.5, -0.1}, cfg), std::invalid_argument);
}
