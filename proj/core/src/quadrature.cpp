#include "stabsel/quadrature.hpp"

#include <cmath>
#include <stdexcept>

namespace stabsel {

GaussHermite::GaussHermite(int order) {
  if (order < 1) throw std::invalid_argument("GaussHermite: order must be >= 1");
  // Jacobi matrix of the probabilists' Hermite polynomials: zero diagonal,
  // off-diagonal sqrt(k).  Eigenvalues are the nodes; weights are the squared
  // first components of the normalized eigenvectors (total mass 1).
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double b = std::sqrt(static_cast<double>(k));
    J(k, k - 1) = b;
    J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  nodes = es.eigenvalues();
  weights.resize(order);
  for (int k = 0; k < order; ++k) {
    const double v0 = es.eigenvectors()(0, k);
    weights[k] = v0 * v0;
  }
  // Symmetrize: eigenvalues are already sorted ascending; enforce exact
  // +/- node pairs and equal weights so odd moments vanish identically.
  for (int k = 0; k < order / 2; ++k) {
    const int j = order - 1 - k;
    const double x = 0.5 * (nodes[j] - nodes[k]);
    const double w = 0.5 * (weights[j] + weights[k]);
    nodes[k] = -x;
    nodes[j] = x;
    weights[k] = w;
    weights[j] = w;
  }
  if (order % 2 == 1) nodes[order / 2] = 0.0;
  weights /= weights.sum();
}

GaussLegendre::GaussLegendre(int order) {
  if (order < 1) throw std::invalid_argument("GaussLegendre: order must be >= 1");
  // Jacobi matrix of the Legendre polynomials: zero diagonal, off-diagonal
  // k / sqrt(4k^2 - 1); weights are 2 * squared first eigenvector components.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    const double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k, k - 1) = b;
    J(k - 1, k) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  nodes = es.eigenvalues();
  weights.resize(order);
  for (int k = 0; k < order; ++k) {
    const double v0 = es.eigenvectors()(0, k);
    weights[k] = 2.0 * v0 * v0;
  }
  for (int k = 0; k < order / 2; ++k) {
    const int j = order - 1 - k;
    const double x = 0.5 * (nodes[j] - nodes[k]);
    const double w = 0.5 * (weights[j] + weights[k]);
    nodes[k] = -x;
    nodes[j] = x;
    weights[k] = w;
    weights[j] = w;
  }
  if (order % 2 == 1) nodes[order / 2] = 0.0;
  weights *= 2.0 / weights.sum();
}

}  // namespace stabsel
