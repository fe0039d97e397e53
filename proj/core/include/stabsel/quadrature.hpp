#pragma once

#include <Eigen/Dense>

namespace stabsel {

// Gauss-Hermite rule for the standard normal measure:
//   integral f(eta) dN(0,1)(eta) ~= sum_k weights[k] * f(nodes[k]).
// Nodes/weights via Golub-Welsch on the probabilists' Hermite Jacobi matrix,
// then symmetrized so that nodes come in exact +/- pairs (odd integrands
// cancel to the last bit).
struct GaussHermite {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;

  explicit GaussHermite(int order);
  int order() const { return static_cast<int>(nodes.size()); }

  // sum_k w_k f(x_k)
  template <class F>
  double expect(F&& f) const {
    double acc = 0.0;
    for (int k = 0; k < nodes.size(); ++k) acc += weights[k] * f(nodes[k]);
    return acc;
  }
};

// Gauss-Legendre rule on [-1, 1] with unit weight (weights sum to 2),
// symmetrized like GaussHermite.  Building block for composite panel rules
// over piecewise-smooth integrands.
struct GaussLegendre {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;

  explicit GaussLegendre(int order);
  int order() const { return static_cast<int>(nodes.size()); }
};

}  // namespace stabsel
