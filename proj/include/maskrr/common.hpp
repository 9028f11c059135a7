#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace maskrr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ---- error taxonomy (mapped to CLI exit codes) ----

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- column-named numeric matrix ----

struct Table {
  MatrixXd values;                 // n rows x p columns
  std::vector<std::string> names;  // size p

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index p() const { return values.cols(); }

  int col(const std::string& name) const {
    for (std::size_t j = 0; j < names.size(); ++j)
      if (names[j] == name) return static_cast<int>(j);
    return -1;
  }

  int col_required(const std::string& name) const {
    int j = col(name);
    if (j < 0) throw DataError("missing column: " + name);
    return j;
  }

  // Subset of columns, in the requested order; throws if any is absent.
  Table select(const std::vector<std::string>& cols) const {
    Table out;
    out.values.resize(values.rows(), static_cast<Eigen::Index>(cols.size()));
    out.names = cols;
    for (std::size_t j = 0; j < cols.size(); ++j)
      out.values.col(static_cast<Eigen::Index>(j)) = values.col(col_required(cols[j]));
    return out;
  }
};

// ---- small numeric helpers ----

inline double clip(double x, double lo, double hi) {
  return x < lo ? lo : (x > hi ? hi : x);
}

// Numerically stable logistic function.
inline double expit(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace maskrr
