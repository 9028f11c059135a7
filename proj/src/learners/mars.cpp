#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "maskrr/models.hpp"
#include "maskrr/stats.hpp"

namespace maskrr {

namespace {

constexpr double kRidge = 1e-10;  // conditioning only

double hinge_value(const HingeTerm& t, double x) {
  return t.sign > 0 ? std::max(0.0, x - t.knot) : std::max(0.0, t.knot - x);
}

// Solve the ridge-stabilized normal equations, return (beta, rss).
std::pair<VectorXd, double> ls_fit(const MatrixXd& B, const VectorXd& y) {
  MatrixXd A = B.transpose() * B;
  A.diagonal().array() += kRidge;
  VectorXd rhs = B.transpose() * y;
  VectorXd beta = A.ldlt().solve(rhs);
  double rss = (y - B * beta).squaredNorm();
  return {beta, rss};
}

double gcv(double rss, int n, int m, double penalty) {
  double c = m + penalty * (m - 1) / 2.0;
  if (c >= n) return std::numeric_limits<double>::infinity();
  double denom = 1.0 - c / static_cast<double>(n);
  return (rss / n) / (denom * denom);
}

}  // namespace

MatrixXd MarsModel::design(const MatrixXd& X) const {
  MatrixXd B = MatrixXd::Ones(X.rows(), 1 + static_cast<Eigen::Index>(terms.size()));
  for (std::size_t k = 0; k < terms.size(); ++k)
    for (Eigen::Index i = 0; i < X.rows(); ++i)
      B(i, 1 + static_cast<Eigen::Index>(k)) =
          hinge_value(terms[k], X(i, terms[k].col));
  return B;
}

VectorXd MarsModel::predict(const MatrixXd& X) const {
  return design(X) * coef;
}

std::shared_ptr<const FittedModel> fit_adaptive_splines(const MatrixXd& X,
                                                        const VectorXd& y,
                                                        Task task,
                                                        const Hyperparams& hp) {
  const Eigen::Index n = X.rows(), p = X.cols();
  auto model = std::make_shared<MarsModel>();
  model->task = task;

  // candidate knots: distinct values per column, quantile-thinned when large
  std::vector<std::vector<double>> knots(static_cast<std::size_t>(p));
  for (Eigen::Index j = 0; j < p; ++j) {
    std::set<double> distinct(X.col(j).data(), X.col(j).data() + n);
    std::vector<double> ks(distinct.begin(), distinct.end());
    if (static_cast<int>(ks.size()) > hp.mars_max_knots) {
      std::vector<double> thin;
      for (int k = 0; k < hp.mars_max_knots; ++k)
        thin.push_back(quantile_type7(
            ks, static_cast<double>(k + 1) / (hp.mars_max_knots + 1)));
      thin.erase(std::unique(thin.begin(), thin.end()), thin.end());
      ks = std::move(thin);
    }
    knots[static_cast<std::size_t>(j)] = std::move(ks);
  }

  // ---- forward pass: greedily add hinge pairs ----
  std::vector<HingeTerm> terms;
  MatrixXd B = MatrixXd::Ones(n, 1);
  double rss = (y.array() - y.mean()).square().sum();
  const double y_scale = std::max(rss, 1e-12);

  while (static_cast<int>(terms.size()) + 3 <= hp.mars_max_terms) {
    double best_rss = rss;
    int best_col = -1;
    double best_knot = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      for (double t : knots[static_cast<std::size_t>(j)]) {
        VectorXd u(n), v(n);
        for (Eigen::Index i = 0; i < n; ++i) {
          u[i] = std::max(0.0, X(i, j) - t);
          v[i] = std::max(0.0, t - X(i, j));
        }
        if (u.maxCoeff() <= 0.0 && v.maxCoeff() <= 0.0) continue;
        MatrixXd Bc(n, B.cols() + 2);
        Bc << B, u, v;
        double cand = ls_fit(Bc, y).second;
        if (cand < best_rss - 1e-12) {
          best_rss = cand;
          best_col = static_cast<int>(j);
          best_knot = t;
        }
      }
    }
    if (best_col < 0 || rss - best_rss < 1e-10 * y_scale) break;
    HingeTerm plus{best_col, best_knot, +1}, minus{best_col, best_knot, -1};
    MatrixXd Bc(n, B.cols() + 2);
    VectorXd u(n), v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      u[i] = hinge_value(plus, X(i, best_col));
      v[i] = hinge_value(minus, X(i, best_col));
    }
    Bc << B, u, v;
    B = std::move(Bc);
    terms.push_back(plus);
    terms.push_back(minus);
    rss = best_rss;
    if (rss < 1e-12 * y_scale) break;
  }

  // ---- backward pass: prune one term at a time by GCV ----
  std::vector<int> active(terms.size());
  for (std::size_t k = 0; k < terms.size(); ++k) active[k] = static_cast<int>(k);

  auto design_for = [&](const std::vector<int>& subset) {
    MatrixXd Bs = MatrixXd::Ones(n, 1 + static_cast<Eigen::Index>(subset.size()));
    for (std::size_t c = 0; c < subset.size(); ++c)
      Bs.col(1 + static_cast<Eigen::Index>(c)) =
          B.col(1 + subset[c]);
    return Bs;
  };

  std::vector<int> best_subset = active;
  double cur_rss = ls_fit(design_for(active), y).second;
  double best_gcv = gcv(cur_rss, static_cast<int>(n),
                        1 + static_cast<int>(active.size()), hp.mars_gcv_penalty);

  while (!active.empty()) {
    double step_rss = std::numeric_limits<double>::infinity();
    std::size_t drop = 0;
    for (std::size_t k = 0; k < active.size(); ++k) {
      std::vector<int> trial = active;
      trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(k));
      double r = ls_fit(design_for(trial), y).second;
      if (r < step_rss - 1e-12) {
        step_rss = r;
        drop = k;
      }
    }
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
    double g = gcv(step_rss, static_cast<int>(n),
                   1 + static_cast<int>(active.size()), hp.mars_gcv_penalty);
    if (g <= best_gcv) {  // ties prefer the smaller model
      best_gcv = g;
      best_subset = active;
    }
  }

  for (int k : best_subset) model->terms.push_back(terms[static_cast<std::size_t>(k)]);
  model->coef = ls_fit(model->design(X), y).first;
  return model;
}

}  // namespace maskrr
