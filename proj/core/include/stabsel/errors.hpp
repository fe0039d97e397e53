#pragma once

#include <stdexcept>
#include <string>

namespace stabsel {

// Runtime numerical failures (non-convergence, factorization breakdown,
// inconsistent moments).  Invalid arguments / precondition violations use
// std::invalid_argument / std::domain_error instead.
class numeric_error : public std::runtime_error {
 public:
  explicit numeric_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace stabsel
