#include <algorithm>
#include <cmath>
#include <set>

#include "maskrr/models.hpp"
#include "maskrr/stats.hpp"

namespace maskrr {

namespace {

constexpr int kDegree = 3;  // cubic

// All B-spline basis values at x for a clamped knot vector.
// Returns the values of the `degree+1` non-vanishing functions and the
// index of the first one.
void bspline_nonzero(const std::vector<double>& knots, double x,
                     double out[kDegree + 1], int& first) {
  const int n_knots = static_cast<int>(knots.size());
  const int n_basis = n_knots - kDegree - 1;
  // find span: largest i with knots[i] <= x, clamped to valid range
  int lo = kDegree, hi = n_knots - kDegree - 2;
  int span = hi;
  if (x < knots[static_cast<std::size_t>(hi)]) {
    span = lo;
    while (span < hi && knots[static_cast<std::size_t>(span + 1)] <= x) ++span;
  }
  double left[kDegree + 1], right[kDegree + 1];
  out[0] = 1.0;
  for (int d = 1; d <= kDegree; ++d) {
    left[d] = x - knots[static_cast<std::size_t>(span + 1 - d)];
    right[d] = knots[static_cast<std::size_t>(span + d)] - x;
    double saved = 0.0;
    for (int r = 0; r < d; ++r) {
      double denom = right[r + 1] + left[d - r];
      double temp = denom > 0.0 ? out[r] / denom : 0.0;
      out[r] = saved + right[r + 1] * temp;
      saved = left[d - r] * temp;
    }
    out[d] = saved;
  }
  first = span - kDegree;
  (void)n_basis;
}

SplineColumn make_column(const VectorXd& x, int interior) {
  SplineColumn col;
  std::set<double> distinct(x.data(), x.data() + x.size());
  col.lo = *distinct.begin();
  col.hi = *distinct.rbegin();
  if (distinct.size() <= 2 || col.hi <= col.lo) {
    col.linear = true;
    col.n_basis = 1;
    return col;
  }
  std::vector<double> vals(x.data(), x.data() + x.size());
  std::vector<double> interior_knots;
  for (int k = 1; k <= interior; ++k) {
    double q = quantile_type7(vals, static_cast<double>(k) / (interior + 1));
    if (q > col.lo && q < col.hi &&
        (interior_knots.empty() || q > interior_knots.back()))
      interior_knots.push_back(q);
  }
  for (int i = 0; i <= kDegree; ++i) col.knots.push_back(col.lo);
  for (double t : interior_knots) col.knots.push_back(t);
  for (int i = 0; i <= kDegree; ++i) col.knots.push_back(col.hi);
  col.n_basis = static_cast<int>(col.knots.size()) - kDegree - 1;
  return col;
}

// Second-order divided-difference penalty on the Greville abscissae.
// Linear functions of x produce B-spline coefficient vectors that are
// linear in the Greville points, so they lie in the penalty null space and
// the fit reproduces them exactly (up to numerics).
MatrixXd difference_penalty(const SplineColumn& col) {
  int m = col.n_basis;
  std::vector<double> grev(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    double s = 0.0;
    for (int d = 1; d <= kDegree; ++d)
      s += col.knots[static_cast<std::size_t>(j + d)];
    grev[static_cast<std::size_t>(j)] = s / kDegree;
  }
  if (m < 3) return MatrixXd::Zero(0, m);
  MatrixXd D = MatrixXd::Zero(m - 2, m);
  for (int i = 0; i + 2 < m; ++i) {
    double h1 = grev[static_cast<std::size_t>(i + 1)] - grev[static_cast<std::size_t>(i)];
    double h2 = grev[static_cast<std::size_t>(i + 2)] - grev[static_cast<std::size_t>(i + 1)];
    double h = grev[static_cast<std::size_t>(i + 2)] - grev[static_cast<std::size_t>(i)];
    if (h1 <= 0.0 || h2 <= 0.0) continue;
    D(i, i) = 2.0 / (h1 * h);
    D(i, i + 1) = -2.0 / (h1 * h2);
    D(i, i + 2) = 2.0 / (h2 * h);
  }
  return D;
}

}  // namespace

MatrixXd SplineModel::design(const MatrixXd& X) const {
  int total = 1;
  for (const auto& c : columns) total += c.n_basis;
  MatrixXd B = MatrixXd::Zero(X.rows(), total);
  B.col(0).setOnes();
  int offset = 1;
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const auto& c = columns[j];
    if (c.linear) {
      B.col(offset) = X.col(static_cast<Eigen::Index>(j));
    } else {
      double vals[kDegree + 1];
      int first;
      for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double x = clip(X(i, static_cast<Eigen::Index>(j)), c.lo, c.hi);
        bspline_nonzero(c.knots, x, vals, first);
        for (int d = 0; d <= kDegree; ++d)
          B(i, offset + first + d) = vals[d];
      }
    }
    offset += c.n_basis;
  }
  return B;
}

VectorXd SplineModel::predict(const MatrixXd& X) const {
  VectorXd eta = design(X) * coef;
  if (task == Task::BinaryProbability)
    for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = expit(eta[i]);
  return eta;
}

std::shared_ptr<const FittedModel> fit_additive_spline(const MatrixXd& X,
                                                       const VectorXd& y,
                                                       Task task,
                                                       const Hyperparams& hp) {
  auto model = std::make_shared<SplineModel>();
  model->task = task;
  for (Eigen::Index j = 0; j < X.cols(); ++j)
    model->columns.push_back(make_column(X.col(j), hp.spline_interior_knots));

  MatrixXd B = model->design(X);
  const Eigen::Index q = B.cols();

  // penalty: none on the intercept, differences on spline blocks, and a
  // tiny ridge everywhere else for conditioning
  MatrixXd P = MatrixXd::Zero(q, q);
  const double tiny = 1e-10;
  int offset = 1;
  for (const auto& c : model->columns) {
    if (!c.linear) {
      MatrixXd D = difference_penalty(c);
      P.block(offset, offset, c.n_basis, c.n_basis) =
          hp.spline_penalty * (D.transpose() * D);
    }
    for (int k = 0; k < c.n_basis; ++k) P(offset + k, offset + k) += tiny;
    offset += c.n_basis;
  }

  if (task == Task::RegressionOnUnit) {
    MatrixXd A = B.transpose() * B + P;
    model->coef = A.ldlt().solve(B.transpose() * y);
    return model;
  }

  // IRLS for the logistic model
  VectorXd beta = VectorXd::Zero(q);
  double ybar = clip(y.mean(), kProbClip, 1.0 - kProbClip);
  beta[0] = logit(ybar);
  model->irls_converged = false;
  for (int iter = 0; iter < hp.irls_max_iter; ++iter) {
    VectorXd eta = B * beta;
    VectorXd w(eta.size()), z(eta.size());
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      double e = clip(eta[i], -30.0, 30.0);
      double p = expit(e);
      double wi = std::max(p * (1.0 - p), 1e-6);
      w[i] = wi;
      z[i] = e + (y[i] - p) / wi;
    }
    MatrixXd Bw = B.array().colwise() * w.array();
    MatrixXd A = Bw.transpose() * B + P;
    VectorXd beta_new = A.ldlt().solve(Bw.transpose() * z);
    double delta = (beta_new - beta).cwiseAbs().maxCoeff();
    beta = beta_new;
    if (delta < hp.irls_tol) {
      model->irls_converged = true;
      break;
    }
  }
  model->coef = beta;
  return model;
}

}  // namespace maskrr
