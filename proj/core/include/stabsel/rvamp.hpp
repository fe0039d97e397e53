#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stabsel/dataset.hpp"
#include "stabsel/denoisers.hpp"

namespace stabsel {

// Natural parameters of the two message sides: for each coordinate the belief
// is proportional to exp(-qhat x^2/2 + h x) smeared by a Gaussian field of
// variance vhat (the resampling noise channel).
struct MessageState {
  Eigen::VectorXd h1x, qhat1x, vhat1x, h1z, qhat1z, vhat1z;
  Eigen::VectorXd h2x, qhat2x, vhat2x, h2z, qhat2z, vhat2z;

  static MessageState init(int N, int M, double vhat_init);
};

struct RvampConfig {
  double eps_tol = 1e-8;  // on max(||xh1-xh2||^2/N, ||zh1-zh2||^2/M)
  int t_max = 500;
  double damping = 1.0;  // weight of the new side-1 fields in the 2->1 update
  double qhat_min = 1e-9, qhat_max = 1e9;
  double vhat_max = 1e9;
  double vhat_init = 1.0;
  int quad_order = 33;
  PenaltyLaw penalty = PenaltyLaw::TwoPoint(1.0);
  OccupationLaw occupation = OccupationLaw::PoissonMeanOne();
  Likelihood likelihood = Likelihood::Logistic();
  bool force_direct = false;  // bypass the Woodbury fast path even when M < N

  void validate() const;
  // per-coordinate penalty: column 0 is unpenalized when the dataset carries
  // an intercept
  PenaltyLaw law_for(int i, const Dataset& data) const;
};

struct IterationDiagnostics {
  long clamped_qhat = 0;
  long clamped_vhat = 0;
  long pinned = 0;  // coordinates matched in the zero-susceptibility limit
};

struct FactorizedMoments {
  Eigen::VectorXd xhat1, chi1x, v1x;
  Eigen::VectorXd zhat1, chi1z, v1z;
};

struct GaussianMoments {
  Eigen::VectorXd xhat2, chi2x, v2x;
  Eigen::VectorXd zhat2, chi2z, v2z;
};

// X = (diag(qx) + A^T diag(qz) A)^{-1} evaluated through the M x M kernel
//   X = D - P^T C^{-1} P,  D = diag(qx)^{-1}, P = A D, C = diag(qz)^{-1} + A D A^T,
// so every product costs O(M^2 N) instead of O(N^3).
class WoodburyOp {
 public:
  WoodburyOp(const Eigen::MatrixXd& A, const Eigen::VectorXd& qx, const Eigen::VectorXd& qz);

  Eigen::VectorXd apply(const Eigen::VectorXd& r) const;  // X r
  Eigen::VectorXd diag_X() const;
  Eigen::VectorXd diag_AXAt() const;
  // diag(X B X) and diag(A X B X A^T) with B = diag(vx) + A^T diag(vz) A
  void v_diagonals(const Eigen::VectorXd& vx, const Eigen::VectorXd& vz, Eigen::VectorXd& v2x,
                   Eigen::VectorXd& v2z) const;

 private:
  Eigen::VectorXd D_;
  Eigen::MatrixXd P_, K_, T_;  // P = A D, K = A D A^T, T = C^{-1} P
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

FactorizedMoments factorized_step(const MessageState& state, const Dataset& data,
                                  const RvampConfig& config, const GaussHermite& quad);
void moment_match_1to2(MessageState& state, const FactorizedMoments& moments,
                       const RvampConfig& config, IterationDiagnostics& diag);
GaussianMoments gaussian_step(const MessageState& state, const Dataset& data,
                              const RvampConfig& config);
void moment_match_2to1(MessageState& state, const GaussianMoments& moments,
                       const RvampConfig& config, IterationDiagnostics& diag);

struct RvampResult {
  Eigen::VectorXd h1x, qhat1x, vhat1x;
  Eigen::VectorXd pi;
  Eigen::VectorXd xhat1, xhat2;
  std::vector<double> criterion_trace;
  int iterations = 0;
  bool converged = false;
  IterationDiagnostics diagnostics;
  MessageState final_state;
};

RvampResult run_rvamp(const Dataset& data, const RvampConfig& config,
                      const MessageState* init = nullptr);

struct PathPoint {
  double gamma0 = 0.0;
  bool converged = false;
  bool failed = false;  // hard numeric failure; pi/h1x/vhat1x are empty
  std::string error;
  int iterations = 0;
  Eigen::VectorXd pi, h1x, vhat1x;
};

struct SelectionPath {
  std::vector<PathPoint> points;
};

// gamma_max = ||A^T y||_inf down to gamma_max * min_ratio, log-spaced,
// descending (sparse end first so warm starts track the path)
std::vector<double> default_gamma_grid(const Dataset& data, int n_points = 50,
                                       double min_ratio = 0.01);

// Runs the grid sparsest-first, warm-starting each point from the previous
// fixed point; a failed point is recorded and the next one restarts cold.
SelectionPath selection_path(const Dataset& data, const std::vector<double>& gamma_grid,
                             const RvampConfig& config, bool warm_start = true);

}  // namespace stabsel
