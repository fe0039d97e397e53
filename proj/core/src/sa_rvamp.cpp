#include "stabsel/sa_rvamp.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include "stabsel/errors.hpp"

namespace stabsel {

namespace {

double clamp_count(double v, double lo, double hi, long& counter) {
  if (v < lo) { ++counter; return lo; }
  if (v > hi) { ++counter; return hi; }
  return v;
}

struct ScalarMatched {
  double qhat, vhat;
  bool pinned;
};

// scalar analogue of the per-coordinate matching; chi = 0 is the all-dead
// start (pin everything at 0)
ScalarMatched match_scalars(double chi, double v, double qhat_old, double vhat_old,
                            const RvampConfig& cfg, const char* side, long& cq, long& cv) {
  if (!std::isfinite(chi) || !std::isfinite(v))
    throw numeric_error(std::string("sa moment match: non-finite moments on side ") + side);
  if (chi < 0.0)
    throw numeric_error(std::string("sa moment match: negative susceptibility on side ") + side);
  if (chi == 0.0) return {cfg.qhat_max, 0.0, true};
  return {clamp_count(1.0 / chi - qhat_old, cfg.qhat_min, cfg.qhat_max, cq),
          clamp_count(v / (chi * chi) - vhat_old, 0.0, cfg.vhat_max, cv), false};
}

Eigen::VectorXd match_fields(const Eigen::VectorXd& mean, double chi, const Eigen::VectorXd& h_old,
                             bool pinned) {
  if (pinned) return -h_old;
  return mean / chi - h_old;
}

}  // namespace

SaState SaState::init(int N, int M, double vhat_init) {
  SaState s;
  s.h1x = Eigen::VectorXd::Zero(N);
  s.h1z = Eigen::VectorXd::Zero(M);
  s.h2x = Eigen::VectorXd::Zero(N);
  s.h2z = Eigen::VectorXd::Zero(M);
  s.vhat1x = s.vhat1z = vhat_init;
  return s;
}

MacroObservables macroscopic_observables(const Eigen::VectorXd& xhat1, const Eigen::VectorXd& zhat1,
                                         const Eigen::VectorXd& xhat2, const Eigen::VectorXd& zhat2,
                                         const Eigen::VectorXd& x0, const Eigen::VectorXd& z0) {
  const double N = static_cast<double>(xhat1.size());
  const double M = static_cast<double>(zhat1.size());
  if (x0.size() != xhat1.size() || z0.size() != zhat1.size())
    throw std::invalid_argument("macroscopic_observables: teacher dimensions do not match");
  MacroObservables o;
  o.m1x = x0.dot(xhat1) / N;
  o.q1x = xhat1.squaredNorm() / N;
  o.m1z = z0.dot(zhat1) / M;
  o.q1z = zhat1.squaredNorm() / M;
  o.m2x = x0.dot(xhat2) / N;
  o.q2x = xhat2.squaredNorm() / N;
  o.m2z = z0.dot(zhat2) / M;
  o.q2z = zhat2.squaredNorm() / M;
  o.T_x = x0.squaredNorm() / N;
  o.T_z = z0.squaredNorm() / M;
  return o;
}

SaGaussianOp::SaGaussianOp(const Eigen::MatrixXd& A) : A_(A) {
  const int M = static_cast<int>(A.rows()), N = static_cast<int>(A.cols());
  wide_ = M < N;
  Eigen::MatrixXd gram;
  if (wide_) gram.noalias() = A * A.transpose();
  else gram.noalias() = A.transpose() * A;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
  if (es.info() != Eigen::Success)
    throw numeric_error("SaGaussianOp: eigendecomposition failed");
  W_ = es.eigenvectors();
  lambda_ = es.eigenvalues().cwiseMax(0.0);  // clip roundoff negatives
  if (wide_) {
    full_lambda_ = Eigen::VectorXd::Zero(N);
    full_lambda_.tail(M) = lambda_;
  } else {
    full_lambda_ = lambda_;
  }
}

Eigen::VectorXd SaGaussianOp::apply(double qx, double qz, const Eigen::VectorXd& r) const {
  if (!(qx > 0.0) || !(qz > 0.0)) throw numeric_error("SaGaussianOp: precisions must be > 0");
  if (wide_) {
    // X r = (r - A^T W diag(1/(qx/qz + lambda)) W^T A r) / qx
    Eigen::VectorXd s = W_.transpose() * (A_ * r);
    s.array() /= (qx / qz + lambda_.array());
    return (r - A_.transpose() * (W_ * s)) / qx;
  }
  Eigen::VectorXd s = W_.transpose() * r;
  s.array() /= (qx + qz * lambda_.array());
  return W_ * s;
}

SaGaussianOp::Traces SaGaussianOp::traces(double qx, double qz, double vx, double vz) const {
  if (!(qx > 0.0) || !(qz > 0.0)) throw numeric_error("SaGaussianOp: precisions must be > 0");
  const int N = static_cast<int>(A_.cols()), M = static_cast<int>(A_.rows());
  const auto lam = full_lambda_.array();
  const auto den = (qx + qz * lam);
  Traces t;
  t.chi2x = (1.0 / den).sum() / N;
  t.chi2z = (lam / den).sum() / M;
  t.v2x = ((vx + vz * lam) / den.square()).sum() / N;
  t.v2z = (lam * (vx + vz * lam) / den.square()).sum() / M;
  return t;
}

SaResult run_sa_rvamp(const Dataset& data, const RvampConfig& config, const Eigen::VectorXd* x0,
                      const Eigen::VectorXd* z0, const SaGaussianOp* cached_op) {
  config.validate();
  data.validate();
  if ((x0 == nullptr) != (z0 == nullptr))
    throw std::invalid_argument("run_sa_rvamp: provide both x0 and z0 or neither");
  const int N = data.cols(), M = data.rows();
  const GaussHermite quad(config.quad_order);
  std::optional<SaGaussianOp> local_op;
  if (!cached_op) local_op.emplace(data.A);
  const SaGaussianOp& op = cached_op ? *cached_op : *local_op;
  if (op.eigenvalues().size() != N)
    throw std::invalid_argument("run_sa_rvamp: cached spectral op does not match the dataset");

  SaState s = SaState::init(N, M, config.vhat_init);
  SaResult res;
  res.trace.reserve(config.t_max);
  const double nan = std::numeric_limits<double>::quiet_NaN();

  Eigen::VectorXd xhat1(N), zhat1(M);
  for (int t = 1; t <= config.t_max; ++t) {
    SaIterationRecord rec{};
    rec.qhat1x = s.qhat1x;
    rec.vhat1x = s.vhat1x;
    rec.qhat1z = s.qhat1z;
    rec.vhat1z = s.vhat1z;

    // factorized part with scalar precisions; site-averaged susceptibilities
    double chi1x = 0.0, v1x = 0.0;
    for (int i = 0; i < N; ++i) {
      const XMoments m = avg_x_moments(s.h1x[i], s.qhat1x, s.vhat1x, config.law_for(i, data));
      xhat1[i] = m.mean;
      chi1x += m.susceptibility;
      v1x += m.variance;
    }
    chi1x /= N;
    v1x /= N;
    double chi1z = 0.0, v1z = 0.0;
    for (int mu = 0; mu < M; ++mu) {
      const ZMoments m = avg_z_moments(s.h1z[mu], s.qhat1z, s.vhat1z, data.y[mu],
                                       config.occupation, quad, config.likelihood);
      zhat1[mu] = m.mean;
      chi1z += m.susceptibility;
      v1z += m.variance;
    }
    chi1z /= M;
    v1z /= M;
    rec.chi1x = chi1x;
    rec.v1x = v1x;
    rec.chi1z = chi1z;
    rec.v1z = v1z;

    // moment matching 1 -> 2
    const ScalarMatched mx = match_scalars(chi1x, v1x, s.qhat1x, s.vhat1x, config, "x",
                                           res.diagnostics.clamped_qhat,
                                           res.diagnostics.clamped_vhat);
    const ScalarMatched mz = match_scalars(chi1z, v1z, s.qhat1z, s.vhat1z, config, "z",
                                           res.diagnostics.clamped_qhat,
                                           res.diagnostics.clamped_vhat);
    s.h2x = match_fields(xhat1, chi1x, s.h1x, mx.pinned);
    s.h2z = match_fields(zhat1, chi1z, s.h1z, mz.pinned);
    s.qhat2x = mx.qhat;
    s.vhat2x = mx.vhat;
    s.qhat2z = mz.qhat;
    s.vhat2z = mz.vhat;
    if (mx.pinned || mz.pinned) ++res.diagnostics.pinned;

    // gaussian part via the cached spectrum
    const Eigen::VectorXd r = s.h2x + data.A.transpose() * s.h2z;
    const Eigen::VectorXd xhat2 = op.apply(s.qhat2x, s.qhat2z, r);
    const Eigen::VectorXd zhat2 = data.A * xhat2;
    const SaGaussianOp::Traces tr = op.traces(s.qhat2x, s.qhat2z, s.vhat2x, s.vhat2z);
    rec.chi2x = tr.chi2x;
    rec.v2x = tr.v2x;
    rec.chi2z = tr.chi2z;
    rec.v2z = tr.v2z;

    // moment matching 2 -> 1 with damping
    const ScalarMatched bx = match_scalars(tr.chi2x, tr.v2x, s.qhat2x, s.vhat2x, config, "x",
                                           res.diagnostics.clamped_qhat,
                                           res.diagnostics.clamped_vhat);
    const ScalarMatched bz = match_scalars(tr.chi2z, tr.v2z, s.qhat2z, s.vhat2z, config, "z",
                                           res.diagnostics.clamped_qhat,
                                           res.diagnostics.clamped_vhat);
    const double eta = config.damping;
    s.h1x = eta * match_fields(xhat2, tr.chi2x, s.h2x, bx.pinned) + (1.0 - eta) * s.h1x;
    s.h1z = eta * match_fields(zhat2, tr.chi2z, s.h2z, bz.pinned) + (1.0 - eta) * s.h1z;
    s.qhat1x = eta * bx.qhat + (1.0 - eta) * s.qhat1x;
    s.vhat1x = eta * bx.vhat + (1.0 - eta) * s.vhat1x;
    s.qhat1z = eta * bz.qhat + (1.0 - eta) * s.qhat1z;
    s.vhat1z = eta * bz.vhat + (1.0 - eta) * s.vhat1z;

    if (x0) {
      rec.macro = macroscopic_observables(xhat1, zhat1, xhat2, zhat2, *x0, *z0);
    } else {
      rec.macro = MacroObservables{nan, nan, nan, nan, nan, nan, nan, nan, nan, nan};
      rec.macro.q1x = xhat1.squaredNorm() / N;
      rec.macro.q1z = zhat1.squaredNorm() / M;
      rec.macro.q2x = xhat2.squaredNorm() / N;
      rec.macro.q2z = zhat2.squaredNorm() / M;
    }
    rec.criterion = std::max((xhat1 - xhat2).squaredNorm() / N, (zhat1 - zhat2).squaredNorm() / M);
    res.trace.push_back(rec);
    res.iterations = t;
    res.xhat1 = xhat1;
    res.xhat2 = xhat2;
    if (rec.criterion < config.eps_tol) {
      res.converged = true;
      break;
    }
  }

  res.h1x = s.h1x;
  res.qhat1x = s.qhat1x;
  res.vhat1x = s.vhat1x;
  res.pi.resize(N);
  for (int i = 0; i < N; ++i)
    res.pi[i] = (data.has_intercept && i == 0)
                    ? 1.0
                    : selection_probability(s.h1x[i], s.vhat1x, config.law_for(i, data));
  return res;
}

}  // namespace stabsel
