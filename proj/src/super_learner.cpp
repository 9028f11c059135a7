#include "maskrr/super_learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "maskrr/parallel.hpp"
#include "maskrr/rng.hpp"

namespace maskrr {

// ---- folds ----

FoldAssignment make_folds(int n, int K, const std::vector<int>& strata,
                          std::uint64_t seed) {
  if (K < 2) throw EstimationError("make_folds: K must be at least 2");
  if (n < K) throw EstimationError("make_folds: more folds than observations");
  if (!strata.empty() && static_cast<int>(strata.size()) != n)
    throw EstimationError("make_folds: strata length mismatch");

  FoldAssignment fa;
  fa.K = K;
  fa.fold_of.assign(static_cast<std::size_t>(n), -1);

  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < n; ++i)
    groups[strata.empty() ? 0 : strata[static_cast<std::size_t>(i)]].push_back(i);

  Rng rng(mix_seed(seed));
  // Deal each stratum round-robin, continuing from where the previous
  // stratum stopped: fold sizes then differ by at most one both within
  // every stratum and overall.
  int next_fold = 0;
  for (auto& [label, members] : groups) {
    if (static_cast<int>(members.size()) < K)
      fa.warnings.push_back("stratum " + std::to_string(label) + " has " +
                            std::to_string(members.size()) +
                            " observations for " + std::to_string(K) +
                            " folds");
    shuffle(members, rng);
    for (int idx : members) {
      fa.fold_of[static_cast<std::size_t>(idx)] = next_fold;
      next_fold = (next_fold + 1) % K;
    }
  }
  return fa;
}

// ---- cross-validated predictions ----

CvPredictions cv_predictions(const std::vector<LearnerSpec>& library,
                             const Table& X, const VectorXd& y,
                             const FoldAssignment& folds) {
  const int n = static_cast<int>(y.size());
  const int L = static_cast<int>(library.size());
  const int K = folds.K;
  if (library.empty()) throw EstimationError("cv_predictions: empty library");
  if (static_cast<int>(folds.fold_of.size()) != n)
    throw EstimationError("cv_predictions: fold assignment length mismatch");

  MatrixXd Z = MatrixXd::Zero(n, L);
  // per (fold, learner) error slot; filled independently, combined serially
  std::vector<std::string> errors(static_cast<std::size_t>(K * L));

  std::vector<std::vector<int>> fold_rows(static_cast<std::size_t>(K));
  for (int i = 0; i < n; ++i)
    fold_rows[static_cast<std::size_t>(folds.fold_of[static_cast<std::size_t>(i)])]
        .push_back(i);

  parallel_for(static_cast<std::size_t>(K * L), [&](std::size_t cell) {
    const int k = static_cast<int>(cell) / L;
    const int l = static_cast<int>(cell) % L;
    try {
      const auto& holdout = fold_rows[static_cast<std::size_t>(k)];
      std::vector<int> train;
      train.reserve(static_cast<std::size_t>(n) - holdout.size());
      for (int i = 0; i < n; ++i)
        if (folds.fold_of[static_cast<std::size_t>(i)] != k) train.push_back(i);

      Table Xtr{MatrixXd(static_cast<Eigen::Index>(train.size()), X.p()), X.names};
      VectorXd ytr(static_cast<Eigen::Index>(train.size()));
      for (std::size_t r = 0; r < train.size(); ++r) {
        Xtr.values.row(static_cast<Eigen::Index>(r)) = X.values.row(train[r]);
        ytr[static_cast<Eigen::Index>(r)] = y[train[r]];
      }
      Table Xho{MatrixXd(static_cast<Eigen::Index>(holdout.size()), X.p()), X.names};
      for (std::size_t r = 0; r < holdout.size(); ++r)
        Xho.values.row(static_cast<Eigen::Index>(r)) = X.values.row(holdout[r]);

      FittedLearner fit = fit_learner(library[static_cast<std::size_t>(l)], Xtr, ytr);
      VectorXd pred = predict(fit, Xho);
      for (std::size_t r = 0; r < holdout.size(); ++r)
        Z(holdout[r], l) = pred[static_cast<Eigen::Index>(r)];
    } catch (const std::exception& e) {
      errors[cell] = e.what();
    }
  });

  CvPredictions out;
  std::vector<int> kept_cols;
  for (int l = 0; l < L; ++l) {
    std::string why;
    for (int k = 0; k < K && why.empty(); ++k) {
      const auto& e = errors[static_cast<std::size_t>(k * L + l)];
      if (!e.empty())
        why = "fold " + std::to_string(k) + ": " + e;
    }
    if (why.empty()) {
      kept_cols.push_back(l);
      out.kept.push_back(library[static_cast<std::size_t>(l)]);
    } else {
      out.dropped_log.push_back(library[static_cast<std::size_t>(l)].name() +
                                " dropped (" + why + ")");
    }
  }
  if (kept_cols.empty())
    throw EstimationError("cv_predictions: every learner failed" +
                          (out.dropped_log.empty()
                               ? std::string()
                               : "; first: " + out.dropped_log.front()));
  out.Z.resize(n, static_cast<Eigen::Index>(kept_cols.size()));
  for (std::size_t c = 0; c < kept_cols.size(); ++c)
    out.Z.col(static_cast<Eigen::Index>(c)) = Z.col(kept_cols[c]);
  return out;
}

// ---- meta weights ----

namespace {

double meta_objective(const MatrixXd& Z, const VectorXd& y, const VectorXd& w,
                      MetaLoss loss) {
  VectorXd q = Z * w;
  const double n = static_cast<double>(y.size());
  if (loss == MetaLoss::SquaredError) return (y - q).squaredNorm() / n;
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double p = clip(q[i], kProbClip, 1.0 - kProbClip);
    s -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  return s / n;
}

VectorXd meta_gradient(const MatrixXd& Z, const VectorXd& y, const VectorXd& w,
                       MetaLoss loss) {
  VectorXd q = Z * w;
  const double n = static_cast<double>(y.size());
  if (loss == MetaLoss::SquaredError)
    return 2.0 / n * (Z.transpose() * (q - y));
  VectorXd g(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double p = clip(q[i], kProbClip, 1.0 - kProbClip);
    bool clipped = q[i] < kProbClip || q[i] > 1.0 - kProbClip;
    g[i] = clipped ? 0.0 : (p - y[i]) / (p * (1.0 - p));
  }
  return Z.transpose() * g / n;
}

// Euclidean projection onto the probability simplex (Duchi et al.).
VectorXd project_simplex(VectorXd v) {
  std::vector<double> u(v.data(), v.data() + v.size());
  std::sort(u.begin(), u.end(), std::greater<double>());
  double css = 0.0, theta = 0.0;
  int rho = 0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    css += u[j];
    double t = (css - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) {
      rho = static_cast<int>(j + 1);
      theta = t;
    }
  }
  (void)rho;
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v[i] = std::max(0.0, v[i] - theta);
  return v;
}

// Monotone projected-gradient descent on the simplex with backtracking.
std::pair<VectorXd, double> pgd_simplex(const MatrixXd& Z, const VectorXd& y,
                                        MetaLoss loss, VectorXd w) {
  double obj = meta_objective(Z, y, w, loss);
  double step = 1.0;
  for (int iter = 0; iter < 5000; ++iter) {
    VectorXd grad = meta_gradient(Z, y, w, loss);
    bool improved = false;
    for (int half = 0; half < 40; ++half) {
      VectorXd cand = project_simplex(w - step * grad);
      double cobj = meta_objective(Z, y, cand, loss);
      if (cobj < obj - 1e-14) {
        w = cand;
        obj = cobj;
        improved = true;
        step *= 1.3;  // tentative growth, backtracking will shrink as needed
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  return {w, obj};
}

}  // namespace

VectorXd nnls(const MatrixXd& Z, const VectorXd& y) {
  // Lawson-Hanson active set on the normal equations.
  const Eigen::Index L = Z.cols();
  MatrixXd A = Z.transpose() * Z;
  VectorXd b = Z.transpose() * y;
  VectorXd w = VectorXd::Zero(L);
  std::vector<bool> passive(static_cast<std::size_t>(L), false);
  const double tol = 1e-12 * std::max(1.0, b.cwiseAbs().maxCoeff());

  for (int outer = 0; outer < 30 * static_cast<int>(L) + 30; ++outer) {
    VectorXd grad = b - A * w;
    int best = -1;
    double best_g = tol;
    for (Eigen::Index j = 0; j < L; ++j)
      if (!passive[static_cast<std::size_t>(j)] && grad[j] > best_g) {
        best_g = grad[j];
        best = static_cast<int>(j);
      }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;

    for (;;) {
      std::vector<Eigen::Index> idx;
      for (Eigen::Index j = 0; j < L; ++j)
        if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
      MatrixXd Ap(idx.size(), idx.size());
      VectorXd bp(idx.size());
      for (std::size_t r = 0; r < idx.size(); ++r) {
        bp[static_cast<Eigen::Index>(r)] = b[idx[r]];
        for (std::size_t c = 0; c < idx.size(); ++c)
          Ap(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
              A(idx[r], idx[c]);
      }
      Ap.diagonal().array() += 1e-12;
      VectorXd s = Ap.ldlt().solve(bp);

      double alpha = 1.0;
      bool any_neg = false;
      for (std::size_t r = 0; r < idx.size(); ++r) {
        if (s[static_cast<Eigen::Index>(r)] <= 0.0) {
          any_neg = true;
          double wi = w[idx[r]];
          double den = wi - s[static_cast<Eigen::Index>(r)];
          if (den > 0.0) alpha = std::min(alpha, wi / den);
        }
      }
      if (!any_neg) {
        w.setZero();
        for (std::size_t r = 0; r < idx.size(); ++r)
          w[idx[r]] = s[static_cast<Eigen::Index>(r)];
        break;
      }
      for (std::size_t r = 0; r < idx.size(); ++r)
        w[idx[r]] += alpha * (s[static_cast<Eigen::Index>(r)] - w[idx[r]]);
      for (Eigen::Index j = 0; j < L; ++j)
        if (passive[static_cast<std::size_t>(j)] && w[j] <= 1e-14) {
          passive[static_cast<std::size_t>(j)] = false;
          w[j] = 0.0;
        }
    }
  }
  return w;
}

MetaWeights meta_weights(const MatrixXd& Z, const VectorXd& y, MetaLoss loss) {
  const Eigen::Index L = Z.cols();
  if (L == 0) throw EstimationError("meta_weights: no learners");
  if (Z.rows() != y.size())
    throw EstimationError("meta_weights: dimension mismatch");

  MetaWeights out;
  if (L == 1) {
    out.w = VectorXd::Ones(1);
    out.objective = meta_objective(Z, y, out.w, loss);
    return out;
  }

  // candidate starts: every unit vector, the uniform point, and (for
  // squared error) the normalized NNLS solution
  std::vector<VectorXd> starts;
  for (Eigen::Index j = 0; j < L; ++j) {
    VectorXd e = VectorXd::Zero(L);
    e[j] = 1.0;
    starts.push_back(e);
  }
  starts.push_back(VectorXd::Constant(L, 1.0 / static_cast<double>(L)));
  if (loss == MetaLoss::SquaredError) {
    VectorXd raw = nnls(Z, y);
    double s = raw.sum();
    if (s > 0.0)
      starts.push_back(raw / s);
    else
      out.uniform_fallback = true;
  }

  VectorXd best = starts.front();
  double best_obj = meta_objective(Z, y, best, loss);
  for (const auto& s : starts) {
    double o = meta_objective(Z, y, s, loss);
    if (o < best_obj) {
      best_obj = o;
      best = s;
    }
  }

  // monotone polish: the result can only improve on the best start, so the
  // combined objective never exceeds any single learner's objective
  auto [w, obj] = pgd_simplex(Z, y, loss, best);
  out.w = w;
  out.objective = obj;
  return out;
}

// ---- stacked fit ----

SuperLearnerFit sl_fit(const SuperLearnerConfig& config, const Table& X,
                       const VectorXd& y, Task task) {
  if (config.library.empty()) throw EstimationError("sl_fit: empty library");
  const int n = static_cast<int>(y.size());

  SuperLearnerFit fit;
  fit.task = task;
  fit.config = config;

  std::vector<LearnerSpec> library = config.library;
  for (auto& spec : library) spec.task = task;

  std::vector<int> strata;
  if (config.stratify) {
    strata.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      strata[static_cast<std::size_t>(i)] =
          y[i] > 0.5 ? 1 : 0;  // binary response stratification
  }
  fit.folds = make_folds(n, config.K, strata, config.seed);
  fit.warnings = fit.folds.warnings;

  CvPredictions cv = cv_predictions(library, X, y, fit.folds);

  // full-data refits; a refit failure drops the learner here as well
  std::vector<FittedLearner> refits(cv.kept.size());
  std::vector<std::string> refit_err(cv.kept.size());
  parallel_for(cv.kept.size(), [&](std::size_t l) {
    try {
      refits[l] = fit_learner(cv.kept[l], X, y);
    } catch (const std::exception& e) {
      refit_err[l] = e.what();
    }
  });
  for (std::size_t l = 0; l < cv.kept.size(); ++l) {
    if (refit_err[l].empty()) {
      fit.kept.push_back(cv.kept[l]);
      fit.refits.push_back(std::move(refits[l]));
      fit.Z.conservativeResize(n, fit.Z.cols() + 1);
      fit.Z.col(fit.Z.cols() - 1) = cv.Z.col(static_cast<Eigen::Index>(l));
    } else {
      fit.dropped_log.push_back(cv.kept[l].name() + " dropped (refit: " +
                                refit_err[l] + ")");
    }
  }
  for (const auto& d : cv.dropped_log) fit.dropped_log.push_back(d);
  if (fit.kept.empty())
    throw EstimationError("sl_fit: no learner survived cross-validation");
  for (const auto& d : fit.dropped_log) fit.warnings.push_back(d);

  MetaWeights mw = meta_weights(fit.Z, y, config.loss);
  fit.weights = mw.w;
  fit.cv_risk_combined = mw.objective;
  if (mw.uniform_fallback)
    fit.warnings.push_back("meta weights: NNLS returned all zeros");

  fit.cv_risk_single.resize(static_cast<Eigen::Index>(fit.kept.size()));
  for (Eigen::Index l = 0; l < fit.cv_risk_single.size(); ++l) {
    VectorXd e = VectorXd::Zero(fit.cv_risk_single.size());
    e[l] = 1.0;
    fit.cv_risk_single[l] = [&] {
      VectorXd q = fit.Z.col(l);
      const double nn = static_cast<double>(n);
      if (config.loss == MetaLoss::SquaredError)
        return (y - q).squaredNorm() / nn;
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        double p = clip(q[i], kProbClip, 1.0 - kProbClip);
        s -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
      }
      return s / nn;
    }();
  }
  return fit;
}

VectorXd sl_predict(const SuperLearnerFit& fit, const Table& X) {
  VectorXd out = VectorXd::Zero(X.n());
  for (std::size_t l = 0; l < fit.refits.size(); ++l)
    out += fit.weights[static_cast<Eigen::Index>(l)] *
           predict(fit.refits[l], X);
  double lo = 0.0, hi = 1.0;
  if (fit.task == Task::BinaryProbability) {
    lo = kProbClip;
    hi = 1.0 - kProbClip;
  }
  for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = clip(out[i], lo, hi);
  return out;
}

}  // namespace maskrr
