#include "stabsel/csv_data.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace stabsel {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    size_t start = cell.find_first_not_of(' ');
    out.push_back(start == std::string::npos ? "" : cell.substr(start));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

double parse_cell(const std::string& cell, int row, const std::string& col) {
  try {
    size_t pos = 0;
    const double v = std::stod(cell, &pos);
    if (pos != cell.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::invalid_argument("load_and_preprocess: cannot parse '" + cell + "' at data row " +
                                std::to_string(row) + ", column '" + col + "'");
  }
}

}  // namespace

LoadedData load_and_preprocess(const std::string& path, const PreprocessOptions& options) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_and_preprocess: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw std::invalid_argument("load_and_preprocess: '" + path + "' is empty");
  const std::vector<std::string> header = split_csv_line(line);

  int label_idx = -1;
  std::vector<std::string> feature_names;
  std::vector<int> feature_cols;
  for (int j = 0; j < static_cast<int>(header.size()); ++j) {
    if (header[j] == options.label_column) {
      if (label_idx >= 0)
        throw std::invalid_argument("load_and_preprocess: duplicate label column '" +
                                    options.label_column + "'");
      label_idx = j;
    } else {
      feature_names.push_back(header[j]);
      feature_cols.push_back(j);
    }
  }
  if (label_idx < 0)
    throw std::invalid_argument("load_and_preprocess: label column '" + options.label_column +
                                "' not found");
  if (feature_cols.empty())
    throw std::invalid_argument("load_and_preprocess: no feature columns in '" + path + "'");

  std::vector<std::vector<double>> rows;
  std::vector<double> labels;
  int row_no = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    ++row_no;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size())
      throw std::invalid_argument("load_and_preprocess: data row " + std::to_string(row_no) +
                                  " has " + std::to_string(cells.size()) + " cells, expected " +
                                  std::to_string(header.size()));
    const double raw_label = parse_cell(cells[label_idx], row_no, header[label_idx]);
    double y;
    if (raw_label == 0.0 || raw_label == -1.0) y = -1.0;
    else if (raw_label == 1.0) y = 1.0;
    else
      throw std::invalid_argument("load_and_preprocess: label must be in {0,1} or {-1,+1}; got " +
                                  std::to_string(raw_label) + " at data row " +
                                  std::to_string(row_no));
    labels.push_back(y);
    std::vector<double> feat(feature_cols.size());
    for (size_t k = 0; k < feature_cols.size(); ++k)
      feat[k] = parse_cell(cells[feature_cols[k]], row_no, header[feature_cols[k]]);
    rows.push_back(std::move(feat));
  }
  if (rows.empty()) throw std::invalid_argument("load_and_preprocess: no data rows in '" + path + "'");

  const int M = static_cast<int>(rows.size());
  const int P = static_cast<int>(feature_cols.size());
  Eigen::MatrixXd X(M, P);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < P; ++j) X(i, j) = rows[i][j];

  if (options.log10_features) {
    for (int j = 0; j < P; ++j)
      for (int i = 0; i < M; ++i) {
        if (!(X(i, j) > 0.0))
          throw std::invalid_argument("load_and_preprocess: log10 requires positive values; got " +
                                      std::to_string(X(i, j)) + " at data row " +
                                      std::to_string(i + 1) + ", column '" + feature_names[j] + "'");
        X(i, j) = std::log10(X(i, j));
      }
  }
  if (options.standardize) {
    for (int j = 0; j < P; ++j) {
      const double mean = X.col(j).mean();
      X.col(j).array() -= mean;
      const double var = X.col(j).squaredNorm() / M;  // population variance
      if (!(var > 0.0))
        throw std::invalid_argument("load_and_preprocess: column '" + feature_names[j] +
                                    "' has zero variance; cannot standardize");
      X.col(j) /= std::sqrt(var);
    }
  }

  LoadedData out;
  if (options.add_intercept) {
    out.dataset.A.resize(M, P + 1);
    out.dataset.A.col(0).setOnes();
    out.dataset.A.rightCols(P) = X;
    out.dataset.has_intercept = true;
    out.feature_names.reserve(P + 1);
    out.feature_names.emplace_back("(intercept)");
    for (auto& n : feature_names) out.feature_names.push_back(std::move(n));
  } else {
    out.dataset.A = std::move(X);
    out.feature_names = std::move(feature_names);
  }
  out.dataset.y = Eigen::Map<Eigen::VectorXd>(labels.data(), M);
  out.dataset.validate();
  return out;
}

}  // namespace stabsel
