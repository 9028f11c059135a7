#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maskrr/learners.hpp"

namespace maskrr {

// ---- cross-validation folds ----

struct FoldAssignment {
  int K = 0;
  std::vector<int> fold_of;  // fold index in [0,K) per observation
  std::vector<std::string> warnings;
};

// Deterministic stratified K-fold assignment.  Fold sizes differ by at most
// one overall and within every stratum.  `strata` may be empty (single
// stratum).  Strata smaller than K are permitted but flagged in warnings.
FoldAssignment make_folds(int n, int K, const std::vector<int>& strata,
                          std::uint64_t seed);

// ---- cross-validated library predictions ----

struct CvPredictions {
  MatrixXd Z;                      // n x L_kept held-out predictions
  std::vector<LearnerSpec> kept;   // library entries that fit on every fold
  std::vector<std::string> dropped_log;  // one entry per dropped learner
};

// Held-out predictions: Z(i, l) is learner l's prediction for observation i
// from the fit that excluded i's fold.  Screening runs inside each training
// fold.  A learner that fails on any fold is dropped entirely and logged.
CvPredictions cv_predictions(const std::vector<LearnerSpec>& library,
                             const Table& X, const VectorXd& y,
                             const FoldAssignment& folds);

// ---- meta-learning ----

enum class MetaLoss { SquaredError, LogLoss };

struct MetaWeights {
  VectorXd w;         // simplex weights over the kept library
  double objective;   // cv loss at w
  bool uniform_fallback = false;  // NNLS collapsed to all-zero
};

// Convex combination minimizing cv loss over the probability simplex.
// Squared error: non-negative least squares (active set) normalized to the
// simplex; log loss: projected gradient.  Both are polished by monotone
// projected-gradient descent started from the best of the candidate points
// and every unit vector, so the returned objective never exceeds the
// objective of any single learner.
MetaWeights meta_weights(const MatrixXd& Z, const VectorXd& y, MetaLoss loss);

// Raw non-negative least squares (Lawson-Hanson active set), exposed for
// testing against a grid-search oracle.
VectorXd nnls(const MatrixXd& Z, const VectorXd& y);

// ---- the stacked estimator ----

struct SuperLearnerConfig {
  std::vector<LearnerSpec> library;
  int K = 10;
  MetaLoss loss = MetaLoss::SquaredError;
  bool stratify = false;  // stratify folds on a binary response
  std::uint64_t seed = 0;
};

struct SuperLearnerFit {
  Task task = Task::RegressionOnUnit;
  SuperLearnerConfig config;
  FoldAssignment folds;
  MatrixXd Z;
  std::vector<LearnerSpec> kept;
  std::vector<std::string> dropped_log;
  VectorXd weights;
  double cv_risk_combined = 0.0;
  VectorXd cv_risk_single;  // per kept learner
  std::vector<FittedLearner> refits;  // full-data refits of kept learners
  std::vector<std::string> warnings;
};

SuperLearnerFit sl_fit(const SuperLearnerConfig& config, const Table& X,
                       const VectorXd& y, Task task);

// Weighted combination of the refit library, clipped to the task range.
VectorXd sl_predict(const SuperLearnerFit& fit, const Table& X);

}  // namespace maskrr
