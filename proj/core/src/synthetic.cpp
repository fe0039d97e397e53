#include "stabsel/synthetic.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace stabsel {

namespace {

// Haar-distributed orthonormal columns: QR of a Gaussian matrix with the
// R-diagonal sign fix (Q <- Q diag(sign(R_ii))), which makes the law exactly
// rotation invariant.
Eigen::MatrixXd haar_columns(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd G(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) G(i, j) = gauss(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
  Eigen::MatrixXd R = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (int j = 0; j < cols; ++j)
    if (R(j, j) < 0.0) Q.col(j) = -Q.col(j);
  return Q;
}

}  // namespace

Eigen::VectorXd generate_signal(int N, double rho, std::mt19937_64& rng) {
  if (N <= 0) throw std::invalid_argument("generate_signal: N must be > 0");
  if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("generate_signal: rho must be in [0,1]");
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(N);
  if (rho == 0.0) {
    std::cerr << "generate_signal: rho = 0, returning the zero signal\n";
    return x0;
  }
  std::bernoulli_distribution on(rho);
  std::normal_distribution<double> slab(0.0, 1.0 / std::sqrt(rho));
  for (int i = 0; i < N; ++i)
    if (on(rng)) x0[i] = slab(rng);
  return x0;
}

Eigen::MatrixXd generate_iid_gaussian(int M, int N, std::mt19937_64& rng) {
  if (M <= 0 || N <= 0) throw std::invalid_argument("generate_iid_gaussian: M, N must be > 0");
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(N)));
  Eigen::MatrixXd A(M, N);
  for (int j = 0; j < N; ++j)
    for (int i = 0; i < M; ++i) A(i, j) = gauss(rng);
  return A;
}

Eigen::MatrixXd generate_row_orthogonal(int M, int N, std::mt19937_64& rng) {
  if (M <= 0 || N <= 0) throw std::invalid_argument("generate_row_orthogonal: M, N must be > 0");
  if (M > N) throw std::invalid_argument("generate_row_orthogonal: requires M <= N");
  Eigen::MatrixXd V1 = haar_columns(N, M, rng);  // thin N x M
  Eigen::MatrixXd U = haar_columns(M, M, rng);
  return U * V1.transpose();
}

Eigen::VectorXd generate_responses(const Eigen::MatrixXd& A, const Eigen::VectorXd& x0,
                                   const Likelihood& channel, std::mt19937_64& rng) {
  if (x0.size() != A.cols())
    throw std::invalid_argument("generate_responses: x0 length does not match A columns");
  const Eigen::VectorXd z0 = A * x0;
  Eigen::VectorXd y(z0.size());
  if (channel.kind == LikelihoodKind::logistic) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int mu = 0; mu < z0.size(); ++mu) {
      const double p = 1.0 / (1.0 + std::exp(-z0[mu]));
      y[mu] = unif(rng) < p ? 1.0 : -1.0;
    }
  } else {
    std::normal_distribution<double> noise(0.0, std::sqrt(channel.noise_variance));
    for (int mu = 0; mu < z0.size(); ++mu) y[mu] = z0[mu] + noise(rng);
  }
  return y;
}

}  // namespace stabsel
