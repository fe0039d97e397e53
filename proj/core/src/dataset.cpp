#include "stabsel/dataset.hpp"

#include <stdexcept>
#include <string>

namespace stabsel {

void Dataset::validate() const {
  if (A.rows() == 0 || A.cols() == 0) throw std::invalid_argument("Dataset: empty design matrix");
  if (y.size() != A.rows())
    throw std::invalid_argument("Dataset: y has " + std::to_string(y.size()) + " entries for " +
                                std::to_string(A.rows()) + " rows");
  if (!A.allFinite()) throw std::invalid_argument("Dataset: non-finite entry in A");
  if (!y.allFinite()) throw std::invalid_argument("Dataset: non-finite entry in y");
  if (has_intercept && (A.col(0).array() != 1.0).any())
    throw std::invalid_argument("Dataset: intercept column 0 is not all ones");
}

}  // namespace stabsel
