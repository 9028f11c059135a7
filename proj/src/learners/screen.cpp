#include <algorithm>
#include <cmath>

#include "maskrr/learners.hpp"
#include "maskrr/stats.hpp"

namespace maskrr {

std::vector<bool> screen_correlation(const MatrixXd& X, const VectorXd& y,
                                     double alpha, int min_keep) {
  const Eigen::Index n = X.rows(), p = X.cols();
  if (y.size() != n) throw EstimationError("screen: y length mismatch");
  if (n < 3) throw EstimationError("screen: need at least 3 observations");

  double ymin = y.minCoeff(), ymax = y.maxCoeff();
  if (ymin == ymax)
    throw EstimationError("screen: response is constant");

  std::vector<bool> keep(static_cast<std::size_t>(p), false);
  std::vector<double> abs_r(static_cast<std::size_t>(p), -1.0);  // -1: constant col

  std::vector<double> xv(static_cast<std::size_t>(n)), yv(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) yv[static_cast<std::size_t>(i)] = y[i];

  for (Eigen::Index j = 0; j < p; ++j) {
    double cmin = X.col(j).minCoeff(), cmax = X.col(j).maxCoeff();
    if (cmin == cmax) continue;  // constant columns are never retained
    for (Eigen::Index i = 0; i < n; ++i) xv[static_cast<std::size_t>(i)] = X(i, j);
    double r = pearson_r(xv, yv);
    abs_r[static_cast<std::size_t>(j)] = std::fabs(r);
    double pval = pearson_pvalue(r, static_cast<int>(n));
    if (pval < alpha) keep[static_cast<std::size_t>(j)] = true;
  }

  int kept = static_cast<int>(std::count(keep.begin(), keep.end(), true));
  if (kept < min_keep) {
    // rank fallback: retain the non-constant columns with largest |r|
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < abs_r.size(); ++j)
      if (abs_r[j] >= 0.0) order.push_back(j);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return abs_r[a] > abs_r[b];
    });
    std::fill(keep.begin(), keep.end(), false);
    int want = std::min<int>(min_keep, static_cast<int>(order.size()));
    for (int k = 0; k < want; ++k) keep[order[static_cast<std::size_t>(k)]] = true;
  }
  return keep;
}

}  // namespace maskrr
