#pragma once

#include <string>
#include <vector>

#include "stabsel/dataset.hpp"

namespace stabsel {

struct PreprocessOptions {
  std::string label_column;
  bool log10_features = false;  // requires strictly positive raw features
  bool standardize = false;     // per-column mean 0, variance 1 (population, 1/M)
  bool add_intercept = false;   // prepend all-ones column after the transforms
};

struct LoadedData {
  Dataset dataset;
  std::vector<std::string> feature_names;  // includes "(intercept)" if added
};

// Reads a headered CSV, maps labels {0,1} or {-1,+1} to {-1,+1}, applies the
// transforms in the order log10 -> standardize -> intercept.  Errors carry
// the offending row/column.
LoadedData load_and_preprocess(const std::string& path, const PreprocessOptions& options);

}  // namespace stabsel
