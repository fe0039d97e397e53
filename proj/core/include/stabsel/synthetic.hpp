#pragma once

#include <cstdint>
#include <random>

#include "stabsel/dataset.hpp"
#include "stabsel/likelihood.hpp"

namespace stabsel {

// Bernoulli-Gaussian signal: x0_i = 0 w.p. 1-rho, else N(0, 1/rho), so that
// E[x0_i^2] = 1 regardless of rho.  rho = 0 returns the zero vector (warns).
Eigen::VectorXd generate_signal(int N, double rho, std::mt19937_64& rng);

// i.i.d. Gaussian design, entries N(0, 1/N).
Eigen::MatrixXd generate_iid_gaussian(int M, int N, std::mt19937_64& rng);

// Row-orthogonal design A = U [I 0] V^T with U, V Haar (A A^T = I_M).
// Requires M <= N.
Eigen::MatrixXd generate_row_orthogonal(int M, int N, std::mt19937_64& rng);

// Draw y from the channel at z0 = A x0.  logistic: y in {-1,+1} with
// P(y=+1|z) = sigma(z); gaussian: y = z + sqrt(noise_variance) xi.
Eigen::VectorXd generate_responses(const Eigen::MatrixXd& A, const Eigen::VectorXd& x0,
                                   const Likelihood& channel, std::mt19937_64& rng);

}  // namespace stabsel
