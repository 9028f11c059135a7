#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "maskrr/common.hpp"

namespace maskrr {

// ---- learner configuration ----

enum class Algorithm {
  EmpiricalMean,     // "mean"
  AdditiveSpline,    // "spline"  - penalized additive B-spline regression
  RegressionTree,    // "tree"    - greedy binary recursive partitioning
  GradientBoosting,  // "boost"   - gradient boosted shallow trees
  AdaptiveSplines,   // "mars"    - forward/backward hinge-basis regression
};

enum class Task {
  RegressionOnUnit,   // continuous response on the [0,1] scale
  BinaryProbability,  // P(y=1); predictions are probabilities
};

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

// Probabilities are kept strictly inside (0,1).
constexpr double kProbClip = 1e-6;

struct ScreenSpec {
  double alpha = 0.10;  // keep columns with p-value < alpha
  int min_keep = 2;     // fall back to top-|r| columns if fewer pass
  std::vector<std::string> always_keep;  // exempt from screening, always kept
};

struct Hyperparams {
  // additive spline
  int spline_interior_knots = 4;
  double spline_penalty = 1e-6;
  int irls_max_iter = 50;
  double irls_tol = 1e-8;
  // regression tree
  int tree_max_depth = 5;
  int tree_min_leaf = 5;
  // gradient boosting
  int boost_rounds = 100;
  int boost_depth = 3;
  int boost_min_leaf = 5;
  double boost_learning_rate = 0.1;
  // adaptive hinge splines
  int mars_max_terms = 21;        // basis functions including intercept
  double mars_gcv_penalty = 3.0;  // cost per hinge pair in GCV
  int mars_max_knots = 64;        // candidate knots per column
};

struct LearnerSpec {
  Algorithm algorithm = Algorithm::EmpiricalMean;
  Task task = Task::RegressionOnUnit;
  Hyperparams hp;
  std::optional<ScreenSpec> screen;

  std::string name() const;  // e.g. "spline+screen"
};

// ---- fitted models ----

class FittedModel {
 public:
  virtual ~FittedModel() = default;
  // X has exactly the retained training columns, in training order.
  // Predictions are raw (not clipped to the task range).
  virtual VectorXd predict(const MatrixXd& X) const = 0;
};

struct FittedLearner {
  LearnerSpec spec;
  std::vector<std::string> training_columns;  // columns seen at fit time
  std::vector<std::string> retained_columns;  // surviving the screen
  std::shared_ptr<const FittedModel> model;
  Eigen::Index n_train = 0;
};

// ---- operations ----

// Screening mask over the columns of X (true = retain).  Columns whose
// zero-correlation p-value is below alpha are retained; if fewer than
// min_keep pass, the non-constant columns with largest |r| are retained
// instead.  Constant columns are never retained.  Throws if y is constant.
std::vector<bool> screen_correlation(const MatrixXd& X, const VectorXd& y,
                                     double alpha, int min_keep);

// Fits one learner, applying the screen first when configured.  The fit is
// deterministic given spec and data.  Degenerate inputs (constant y, zero
// retained columns) yield constant predictors rather than errors.
FittedLearner fit_learner(const LearnerSpec& spec, const Table& X,
                          const VectorXd& y);

// Predicts on new data.  Every retained training column must be present
// (matched by name).  Output is clipped to the task range: [0,1] for unit
// regression, [kProbClip, 1-kProbClip] for probabilities.
VectorXd predict(const FittedLearner& fit, const Table& X);

// Raw per-algorithm fitters (exposed for direct testing against oracles).
std::shared_ptr<const FittedModel> fit_empirical_mean(const MatrixXd& X,
                                                      const VectorXd& y,
                                                      Task task,
                                                      const Hyperparams& hp);
std::shared_ptr<const FittedModel> fit_additive_spline(const MatrixXd& X,
                                                       const VectorXd& y,
                                                       Task task,
                                                       const Hyperparams& hp);
std::shared_ptr<const FittedModel> fit_regression_tree(const MatrixXd& X,
                                                       const VectorXd& y,
                                                       Task task,
                                                       const Hyperparams& hp);
std::shared_ptr<const FittedModel> fit_gradient_boosting(const MatrixXd& X,
                                                         const VectorXd& y,
                                                         Task task,
                                                         const Hyperparams& hp);
std::shared_ptr<const FittedModel> fit_adaptive_splines(const MatrixXd& X,
                                                        const VectorXd& y,
                                                        Task task,
                                                        const Hyperparams& hp);

}  // namespace maskrr
