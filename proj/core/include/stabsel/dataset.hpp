#pragma once

#include <Eigen/Dense>

namespace stabsel {

// Design matrix A (M x N), responses y (M).  If has_intercept, column 0 is
// all ones and is treated as unpenalized by the solvers.
struct Dataset {
  Eigen::MatrixXd A;
  Eigen::VectorXd y;
  bool has_intercept = false;

  int rows() const { return static_cast<int>(A.rows()); }
  int cols() const { return static_cast<int>(A.cols()); }

  // throws std::invalid_argument on shape mismatch, non-finite entries, or a
  // broken intercept column
  void validate() const;
};

}  // namespace stabsel
