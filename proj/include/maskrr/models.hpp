#pragma once

// Concrete fitted-model structures.  Exposed so tests can verify model
// internals (tree partitions, boosting loss traces, basis layouts) against
// independent oracles.

#include <vector>

#include "maskrr/learners.hpp"

namespace maskrr {

// ---- constant predictor ----

class ConstantModel final : public FittedModel {
 public:
  explicit ConstantModel(double v) : value(v) {}
  double value;
  VectorXd predict(const MatrixXd& X) const override {
    return VectorXd::Constant(X.rows(), value);
  }
};

// ---- additive penalized B-spline regression ----

struct SplineColumn {
  bool linear = false;        // entered as a plain linear term
  double lo = 0.0, hi = 1.0;  // boundary knots (inputs are clamped here)
  std::vector<double> knots;  // full knot vector (clamped cubic)
  int n_basis = 0;
};

class SplineModel final : public FittedModel {
 public:
  std::vector<SplineColumn> columns;  // one per input column
  VectorXd coef;                      // intercept first, then per-column blocks
  Task task = Task::RegressionOnUnit;
  bool irls_converged = true;

  VectorXd predict(const MatrixXd& X) const override;
  MatrixXd design(const MatrixXd& X) const;  // basis expansion used in fitting
};

// ---- greedy binary regression tree ----

struct TreeNode {
  int col = -1;  // -1 for leaves
  double threshold = 0.0;
  double value = 0.0;  // leaf prediction
  int left = -1, right = -1;
  bool is_leaf() const { return col < 0; }
};

class TreeModel final : public FittedModel {
 public:
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  Task task = Task::RegressionOnUnit;

  VectorXd predict(const MatrixXd& X) const override;
  int leaf_index(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  double predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

// Fits a raw tree to an arbitrary response (used by boosting as well).
TreeModel grow_tree(const MatrixXd& X, const VectorXd& y, int max_depth,
                    int min_leaf);

// ---- gradient boosted trees ----

class BoostModel final : public FittedModel {
 public:
  double f0 = 0.0;  // initial predictor (mean or logit of base rate)
  double learning_rate = 0.1;
  std::vector<TreeModel> trees;
  std::vector<double> scale;       // per-round step scaling from backtracking
  std::vector<double> train_loss;  // loss trace, train_loss[0] at f0
  Task task = Task::RegressionOnUnit;

  VectorXd raw_score(const MatrixXd& X) const;
  VectorXd predict(const MatrixXd& X) const override;
};

// ---- adaptive hinge-spline regression ----

struct HingeTerm {
  int col = 0;
  double knot = 0.0;
  int sign = +1;  // +1: max(0, x - knot); -1: max(0, knot - x)
};

class MarsModel final : public FittedModel {
 public:
  std::vector<HingeTerm> terms;  // excluding the intercept
  VectorXd coef;                 // intercept first, then one per term
  Task task = Task::RegressionOnUnit;

  VectorXd predict(const MatrixXd& X) const override;
  MatrixXd design(const MatrixXd& X) const;
};

}  // namespace maskrr
