#pragma once

#include <vector>

#include <Eigen/Dense>

#include "stabsel/dataset.hpp"
#include "stabsel/rvamp.hpp"

namespace stabsel {

// Self-averaged message state: full h fields, scalar precisions/variances.
struct SaState {
  Eigen::VectorXd h1x, h1z, h2x, h2z;
  double qhat1x = 1.0, vhat1x = 1.0, qhat1z = 1.0, vhat1z = 1.0;
  double qhat2x = 1.0, vhat2x = 0.0, qhat2z = 1.0, vhat2z = 0.0;

  static SaState init(int N, int M, double vhat_init);
};

// Teacher overlaps of the iterates; pure measurement.
struct MacroObservables {
  double m1x = 0.0, q1x = 0.0, m1z = 0.0, q1z = 0.0;
  double m2x = 0.0, q2x = 0.0, m2z = 0.0, q2z = 0.0;
  double T_x = 0.0, T_z = 0.0;
};

MacroObservables macroscopic_observables(const Eigen::VectorXd& xhat1, const Eigen::VectorXd& zhat1,
                                         const Eigen::VectorXd& xhat2, const Eigen::VectorXd& zhat2,
                                         const Eigen::VectorXd& x0, const Eigen::VectorXd& z0);

// (qx I + qz A^T A)^{-1} products and normalized traces from a one-time
// eigendecomposition: of A A^T (M x M) when M < N, else of A^T A.
class SaGaussianOp {
 public:
  explicit SaGaussianOp(const Eigen::MatrixXd& A);

  Eigen::VectorXd apply(double qx, double qz, const Eigen::VectorXd& r) const;
  struct Traces {
    double chi2x, chi2z, v2x, v2z;
  };
  // chi2x = N^{-1} Tr X, chi2z = M^{-1} Tr A X A^T,
  // v2x = N^{-1} Tr X B X, v2z = M^{-1} Tr A X B X A^T, B = vx I + vz A^T A
  Traces traces(double qx, double qz, double vx, double vz) const;
  // all N eigenvalues of A^T A, including the N - M zeros
  const Eigen::VectorXd& eigenvalues() const { return full_lambda_; }

 private:
  Eigen::MatrixXd A_;
  Eigen::MatrixXd W_;  // eigenvectors of the decomposed Gram matrix
  Eigen::VectorXd lambda_;
  Eigen::VectorXd full_lambda_;
  bool wide_ = false;  // M < N
};

struct SaIterationRecord {
  // side-1 parameters at the start of the iteration and the factorized-part
  // scalar outputs computed from them
  double qhat1x, vhat1x, qhat1z, vhat1z;
  double chi1x, v1x, chi1z, v1z;
  double chi2x, v2x, chi2z, v2z;
  MacroObservables macro;  // overlaps vs the teacher (NaN when no teacher given)
  double criterion;
};

struct SaResult {
  Eigen::VectorXd h1x;
  double qhat1x = 0.0, vhat1x = 0.0;
  Eigen::VectorXd pi;
  Eigen::VectorXd xhat1, xhat2;
  std::vector<SaIterationRecord> trace;
  int iterations = 0;
  bool converged = false;
  IterationDiagnostics diagnostics;
};

// Algorithm identical to run_rvamp but with site-averaged (scalar) qhat/vhat
// per side; O((M + N) + M N) per iteration after the one-time spectral setup.
// Passing the teacher (x0, z0) fills the per-iteration overlap records.
SaResult run_sa_rvamp(const Dataset& data, const RvampConfig& config,
                      const Eigen::VectorXd* x0 = nullptr, const Eigen::VectorXd* z0 = nullptr,
                      const SaGaussianOp* cached_op = nullptr);

}  // namespace stabsel
