#include "stabsel/rvamp.hpp"

#include <cmath>
#include <stdexcept>

#include "stabsel/errors.hpp"

namespace stabsel {

namespace {

double clamp_count(double v, double lo, double hi, long& counter) {
  if (v < lo) { ++counter; return lo; }
  if (v > hi) { ++counter; return hi; }
  return v;
}

// Matched side-2 parameters for one coordinate.  chi = 0 with vanishing mean
// is the dead-zone (point mass) limit: the outgoing message pins the
// coordinate at 0, i.e. qhat -> clamp upper bound and h2 = -h1.
struct Matched {
  double h, qhat, vhat;
  bool pinned;
};

Matched match_one(double mean, double chi, double v, double h_old, double qhat_old,
                  double vhat_old, const RvampConfig& cfg, const char* side, int idx,
                  long& clamp_q, long& clamp_v) {
  if (!std::isfinite(mean) || !std::isfinite(chi) || !std::isfinite(v))
    throw numeric_error(std::string("moment_match: non-finite moments at ") + side + " coordinate " +
                        std::to_string(idx));
  if (chi < 0.0)
    throw numeric_error(std::string("moment_match: negative susceptibility at ") + side +
                        " coordinate " + std::to_string(idx));
  Matched out{};
  if (chi == 0.0) {
    if (mean != 0.0)
      throw numeric_error(std::string("moment_match: zero susceptibility with nonzero mean at ") +
                          side + " coordinate " + std::to_string(idx));
    out.h = -h_old;
    out.qhat = cfg.qhat_max;
    out.vhat = 0.0;
    out.pinned = true;
    return out;
  }
  out.h = mean / chi - h_old;
  out.qhat = clamp_count(1.0 / chi - qhat_old, cfg.qhat_min, cfg.qhat_max, clamp_q);
  out.vhat = clamp_count(v / (chi * chi) - vhat_old, 0.0, cfg.vhat_max, clamp_v);
  out.pinned = false;
  if (!std::isfinite(out.h))
    throw numeric_error(std::string("moment_match: non-finite field at ") + side + " coordinate " +
                        std::to_string(idx));
  return out;
}

}  // namespace

MessageState MessageState::init(int N, int M, double vhat_init) {
  MessageState s;
  s.h1x = Eigen::VectorXd::Zero(N);
  s.qhat1x = Eigen::VectorXd::Ones(N);
  s.vhat1x = Eigen::VectorXd::Constant(N, vhat_init);
  s.h1z = Eigen::VectorXd::Zero(M);
  s.qhat1z = Eigen::VectorXd::Ones(M);
  s.vhat1z = Eigen::VectorXd::Constant(M, vhat_init);
  s.h2x = Eigen::VectorXd::Zero(N);
  s.qhat2x = Eigen::VectorXd::Ones(N);
  s.vhat2x = Eigen::VectorXd::Zero(N);
  s.h2z = Eigen::VectorXd::Zero(M);
  s.qhat2z = Eigen::VectorXd::Ones(M);
  s.vhat2z = Eigen::VectorXd::Zero(M);
  return s;
}

void RvampConfig::validate() const {
  if (!(eps_tol > 0.0)) throw std::invalid_argument("RvampConfig: eps_tol must be > 0");
  if (t_max < 1) throw std::invalid_argument("RvampConfig: t_max must be >= 1");
  if (!(damping > 0.0 && damping <= 1.0))
    throw std::invalid_argument("RvampConfig: damping must be in (0,1]");
  if (!(qhat_min > 0.0 && qhat_max > qhat_min))
    throw std::invalid_argument("RvampConfig: need 0 < qhat_min < qhat_max");
  if (!(vhat_max > 0.0)) throw std::invalid_argument("RvampConfig: vhat_max must be > 0");
  if (!(vhat_init >= 0.0)) throw std::invalid_argument("RvampConfig: vhat_init must be >= 0");
  if (quad_order < 1) throw std::invalid_argument("RvampConfig: quad_order must be >= 1");
}

PenaltyLaw RvampConfig::law_for(int i, const Dataset& data) const {
  if (data.has_intercept && i == 0) return PenaltyLaw::Unpenalized();
  return penalty;
}

FactorizedMoments factorized_step(const MessageState& state, const Dataset& data,
                                  const RvampConfig& config, const GaussHermite& quad) {
  const int N = data.cols(), M = data.rows();
  FactorizedMoments out;
  out.xhat1.resize(N);
  out.chi1x.resize(N);
  out.v1x.resize(N);
  out.zhat1.resize(M);
  out.chi1z.resize(M);
  out.v1z.resize(M);
  for (int i = 0; i < N; ++i) {
    try {
      const XMoments m =
          avg_x_moments(state.h1x[i], state.qhat1x[i], state.vhat1x[i], config.law_for(i, data));
      out.xhat1[i] = m.mean;
      out.chi1x[i] = m.susceptibility;
      out.v1x[i] = m.variance;
    } catch (const std::exception& e) {
      throw numeric_error("factorized_step: x coordinate " + std::to_string(i) + ": " + e.what());
    }
  }
  for (int mu = 0; mu < M; ++mu) {
    try {
      const ZMoments m = avg_z_moments(state.h1z[mu], state.qhat1z[mu], state.vhat1z[mu],
                                       data.y[mu], config.occupation, quad, config.likelihood);
      out.zhat1[mu] = m.mean;
      out.chi1z[mu] = m.susceptibility;
      out.v1z[mu] = m.variance;
    } catch (const std::exception& e) {
      throw numeric_error("factorized_step: z coordinate " + std::to_string(mu) + ": " + e.what());
    }
  }
  return out;
}

void moment_match_1to2(MessageState& state, const FactorizedMoments& moments,
                       const RvampConfig& config, IterationDiagnostics& diag) {
  const int N = static_cast<int>(state.h1x.size()), M = static_cast<int>(state.h1z.size());
  for (int i = 0; i < N; ++i) {
    const Matched m =
        match_one(moments.xhat1[i], moments.chi1x[i], moments.v1x[i], state.h1x[i],
                  state.qhat1x[i], state.vhat1x[i], config, "x", i, diag.clamped_qhat,
                  diag.clamped_vhat);
    state.h2x[i] = m.h;
    state.qhat2x[i] = m.qhat;
    state.vhat2x[i] = m.vhat;
    if (m.pinned) ++diag.pinned;
  }
  for (int mu = 0; mu < M; ++mu) {
    const Matched m =
        match_one(moments.zhat1[mu], moments.chi1z[mu], moments.v1z[mu], state.h1z[mu],
                  state.qhat1z[mu], state.vhat1z[mu], config, "z", mu, diag.clamped_qhat,
                  diag.clamped_vhat);
    state.h2z[mu] = m.h;
    state.qhat2z[mu] = m.qhat;
    state.vhat2z[mu] = m.vhat;
    if (m.pinned) ++diag.pinned;
  }
}

WoodburyOp::WoodburyOp(const Eigen::MatrixXd& A, const Eigen::VectorXd& qx,
                       const Eigen::VectorXd& qz) {
  if (qx.size() != A.cols() || qz.size() != A.rows())
    throw std::invalid_argument("WoodburyOp: precision vector sizes do not match A");
  if ((qx.array() <= 0.0).any()) throw numeric_error("WoodburyOp: qhat2x must be > 0");
  if ((qz.array() <= 0.0).any()) throw numeric_error("WoodburyOp: qhat2z must be > 0");
  D_ = qx.cwiseInverse();
  P_ = A * D_.asDiagonal();
  K_.noalias() = P_ * A.transpose();
  Eigen::MatrixXd C = K_;
  C.diagonal() += qz.cwiseInverse();
  llt_.compute(C);
  if (llt_.info() != Eigen::Success)
    throw numeric_error(
        "WoodburyOp: inner factorization failed; tighten the qhat clamps or increase damping");
  T_ = llt_.solve(P_);
}

Eigen::VectorXd WoodburyOp::apply(const Eigen::VectorXd& r) const {
  Eigen::VectorXd Pr = P_ * r;
  return D_.cwiseProduct(r) - T_.transpose() * Pr;
}

Eigen::VectorXd WoodburyOp::diag_X() const {
  return D_ - (P_.cwiseProduct(T_)).colwise().sum().transpose();
}

Eigen::VectorXd WoodburyOp::diag_AXAt() const {
  const Eigen::MatrixXd GK = llt_.solve(K_);
  return K_.diagonal() - (K_.cwiseProduct(GK.transpose())).rowwise().sum();
}

void WoodburyOp::v_diagonals(const Eigen::VectorXd& vx, const Eigen::VectorXd& vz,
                             Eigen::VectorXd& v2x, Eigen::VectorXd& v2z) const {
  const int N = static_cast<int>(D_.size());
  const int M = static_cast<int>(K_.rows());
  if ((vx.array() == 0.0).all() && (vz.array() == 0.0).all()) {
    v2x = Eigen::VectorXd::Zero(N);
    v2z = Eigen::VectorXd::Zero(M);
    return;
  }
  // X = D - P^T T;  AX = P - K T;  AXA^T = K - K C^{-1} K
  Eigen::MatrixXd AX = P_;
  AX.noalias() -= K_ * T_;
  const Eigen::VectorXd PT_diag = (P_.cwiseProduct(T_)).colwise().sum().transpose();
  // sum_j vx_j X_ij^2 = vx_i D_i^2 - 2 vx_i D_i (P^T T)_ii + P_.i^T [T diag(vx) T^T] P_.i
  Eigen::MatrixXd R;
  R.noalias() = (T_ * vx.asDiagonal()) * T_.transpose();
  Eigen::MatrixXd RP;
  RP.noalias() = R * P_;
  v2x = vx.cwiseProduct(D_.cwiseProduct(D_)) - 2.0 * vx.cwiseProduct(D_.cwiseProduct(PT_diag)) +
        (P_.cwiseProduct(RP)).colwise().sum().transpose();
  v2x += (AX.cwiseProduct(AX).transpose() * vz);
  const Eigen::MatrixXd GK = llt_.solve(K_);
  Eigen::MatrixXd AXAt = K_;
  AXAt.noalias() -= K_ * GK;
  v2z = AX.cwiseProduct(AX) * vx + AXAt.cwiseProduct(AXAt) * vz;
}

GaussianMoments gaussian_step(const MessageState& state, const Dataset& data,
                              const RvampConfig& config) {
  const int N = data.cols(), M = data.rows();
  const Eigen::VectorXd r = state.h2x + data.A.transpose() * state.h2z;
  GaussianMoments out;
  if (M < N && !config.force_direct) {
    const WoodburyOp op(data.A, state.qhat2x, state.qhat2z);
    out.xhat2 = op.apply(r);
    out.chi2x = op.diag_X();
    out.chi2z = op.diag_AXAt();
    op.v_diagonals(state.vhat2x, state.vhat2z, out.v2x, out.v2z);
  } else {
    Eigen::MatrixXd H = data.A.transpose() * state.qhat2z.asDiagonal() * data.A;
    H.diagonal() += state.qhat2x;
    const Eigen::LLT<Eigen::MatrixXd> llt(H);
    if (llt.info() != Eigen::Success)
      throw numeric_error(
          "gaussian_step: factorization failed; tighten the qhat clamps or increase damping");
    const Eigen::MatrixXd X = llt.solve(Eigen::MatrixXd::Identity(N, N));
    out.xhat2.noalias() = X * r;
    out.chi2x = X.diagonal();
    Eigen::MatrixXd AX;
    AX.noalias() = data.A * X;
    out.chi2z = (AX.cwiseProduct(data.A)).rowwise().sum();
    if ((state.vhat2x.array() == 0.0).all() && (state.vhat2z.array() == 0.0).all()) {
      out.v2x = Eigen::VectorXd::Zero(N);
      out.v2z = Eigen::VectorXd::Zero(M);
    } else {
      out.v2x = X.cwiseProduct(X) * state.vhat2x + AX.cwiseProduct(AX).transpose() * state.vhat2z;
      Eigen::MatrixXd AXAt;
      AXAt.noalias() = AX * data.A.transpose();
      out.v2z = AX.cwiseProduct(AX) * state.vhat2x + AXAt.cwiseProduct(AXAt) * state.vhat2z;
    }
  }
  out.zhat2.noalias() = data.A * out.xhat2;
  return out;
}

void moment_match_2to1(MessageState& state, const GaussianMoments& moments,
                       const RvampConfig& config, IterationDiagnostics& diag) {
  const int N = static_cast<int>(state.h1x.size()), M = static_cast<int>(state.h1z.size());
  const double eta = config.damping;
  for (int i = 0; i < N; ++i) {
    const Matched m =
        match_one(moments.xhat2[i], moments.chi2x[i], moments.v2x[i], state.h2x[i],
                  state.qhat2x[i], state.vhat2x[i], config, "x", i, diag.clamped_qhat,
                  diag.clamped_vhat);
    if (m.pinned) ++diag.pinned;
    state.h1x[i] = eta * m.h + (1.0 - eta) * state.h1x[i];
    state.qhat1x[i] = eta * m.qhat + (1.0 - eta) * state.qhat1x[i];
    state.vhat1x[i] = eta * m.vhat + (1.0 - eta) * state.vhat1x[i];
  }
  for (int mu = 0; mu < M; ++mu) {
    const Matched m =
        match_one(moments.zhat2[mu], moments.chi2z[mu], moments.v2z[mu], state.h2z[mu],
                  state.qhat2z[mu], state.vhat2z[mu], config, "z", mu, diag.clamped_qhat,
                  diag.clamped_vhat);
    if (m.pinned) ++diag.pinned;
    state.h1z[mu] = eta * m.h + (1.0 - eta) * state.h1z[mu];
    state.qhat1z[mu] = eta * m.qhat + (1.0 - eta) * state.qhat1z[mu];
    state.vhat1z[mu] = eta * m.vhat + (1.0 - eta) * state.vhat1z[mu];
  }
}

RvampResult run_rvamp(const Dataset& data, const RvampConfig& config, const MessageState* init) {
  config.validate();
  data.validate();
  const int N = data.cols(), M = data.rows();
  MessageState state = init ? *init : MessageState::init(N, M, config.vhat_init);
  if (state.h1x.size() != N || state.h1z.size() != M)
    throw std::invalid_argument("run_rvamp: init state does not match dataset dimensions");
  const GaussHermite quad(config.quad_order);

  RvampResult res;
  res.criterion_trace.reserve(config.t_max);
  for (int t = 1; t <= config.t_max; ++t) {
    const FactorizedMoments f = factorized_step(state, data, config, quad);
    moment_match_1to2(state, f, config, res.diagnostics);
    const GaussianMoments g = gaussian_step(state, data, config);
    moment_match_2to1(state, g, config, res.diagnostics);
    const double crit = std::max((f.xhat1 - g.xhat2).squaredNorm() / N,
                                 (f.zhat1 - g.zhat2).squaredNorm() / M);
    res.criterion_trace.push_back(crit);
    res.iterations = t;
    res.xhat1 = f.xhat1;
    res.xhat2 = g.xhat2;
    if (crit < config.eps_tol) {
      res.converged = true;
      break;
    }
  }
  res.h1x = state.h1x;
  res.qhat1x = state.qhat1x;
  res.vhat1x = state.vhat1x;
  res.pi.resize(N);
  for (int i = 0; i < N; ++i) {
    res.pi[i] = (data.has_intercept && i == 0)
                    ? 1.0
                    : selection_probability(state.h1x[i], state.vhat1x[i], config.law_for(i, data));
  }
  res.final_state = state;
  return res;
}

std::vector<double> default_gamma_grid(const Dataset& data, int n_points, double min_ratio) {
  if (n_points < 1) throw std::invalid_argument("default_gamma_grid: need at least one point");
  if (!(min_ratio > 0.0 && min_ratio < 1.0))
    throw std::invalid_argument("default_gamma_grid: min_ratio must be in (0,1)");
  const double gmax = (data.A.transpose() * data.y).cwiseAbs().maxCoeff();
  if (!(gmax > 0.0)) throw std::invalid_argument("default_gamma_grid: ||A^T y||_inf is zero");
  std::vector<double> grid(n_points);
  if (n_points == 1) {
    grid[0] = gmax;
    return grid;
  }
  const double step = std::log(min_ratio) / (n_points - 1);
  for (int k = 0; k < n_points; ++k) grid[k] = gmax * std::exp(step * k);
  return grid;
}

SelectionPath selection_path(const Dataset& data, const std::vector<double>& gamma_grid,
                             const RvampConfig& config, bool warm_start) {
  if (gamma_grid.empty()) throw std::invalid_argument("selection_path: empty gamma grid");
  for (double g : gamma_grid)
    if (!(g > 0.0)) throw std::invalid_argument("selection_path: gamma0 values must be > 0");
  SelectionPath path;
  path.points.reserve(gamma_grid.size());
  std::optional<MessageState> carry;
  for (double g : gamma_grid) {
    RvampConfig cfg = config;
    cfg.penalty = config.penalty.with_gamma0(g);
    PathPoint pt;
    pt.gamma0 = g;
    try {
      const RvampResult r =
          run_rvamp(data, cfg, (warm_start && carry.has_value()) ? &*carry : nullptr);
      pt.converged = r.converged;
      pt.iterations = r.iterations;
      pt.pi = r.pi;
      pt.h1x = r.h1x;
      pt.vhat1x = r.vhat1x;
      if (warm_start) carry = r.final_state;
    } catch (const std::exception& e) {
      pt.failed = true;
      pt.error = e.what();
      carry.reset();  // next point restarts from the default init
    }
    path.points.push_back(std::move(pt));
  }
  return path;
}

}  // namespace stabsel
