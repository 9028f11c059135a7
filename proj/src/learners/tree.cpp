#include <algorithm>
#include <cmath>
#include <numeric>

#include "maskrr/models.hpp"
#include "maskrr/parallel.hpp"

namespace maskrr {

namespace {

struct Split {
  bool found = false;
  double gain = 0.0;
  double threshold = 0.0;
};

// Best variance-reduction split of `rows` on column j.  Thresholds are
// midpoints between consecutive distinct values; within the column, ties in
// gain keep the lowest threshold.
Split best_split_on_column(const MatrixXd& X, const VectorXd& y,
                           const std::vector<int>& rows, int j, int min_leaf) {
  const std::size_t m = rows.size();
  std::vector<int> order(rows);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    double xa = X(a, j), xb = X(b, j);
    if (xa != xb) return xa < xb;
    return a < b;  // stable under duplicate values
  });

  double total = 0.0, total2 = 0.0;
  for (int r : order) {
    total += y[r];
    total2 += y[r] * y[r];
  }
  double parent_sse = total2 - total * total / static_cast<double>(m);

  Split best;
  double lsum = 0.0, lsum2 = 0.0;
  for (std::size_t k = 1; k < m; ++k) {
    int r = order[k - 1];
    lsum += y[r];
    lsum2 += y[r] * y[r];
    double xl = X(order[k - 1], j), xr = X(order[k], j);
    if (xl == xr) continue;  // not a boundary between distinct values
    if (k < static_cast<std::size_t>(min_leaf) ||
        m - k < static_cast<std::size_t>(min_leaf))
      continue;
    double nl = static_cast<double>(k), nr = static_cast<double>(m - k);
    double rsum = total - lsum, rsum2 = total2 - lsum2;
    double child_sse = (lsum2 - lsum * lsum / nl) + (rsum2 - rsum * rsum / nr);
    double gain = parent_sse - child_sse;
    if (gain > best.gain + 1e-12 && gain > 1e-12) {
      best.found = true;
      best.gain = gain;
      best.threshold = 0.5 * (xl + xr);
    }
  }
  return best;
}

}  // namespace

TreeModel grow_tree(const MatrixXd& X, const VectorXd& y, int max_depth,
                    int min_leaf) {
  TreeModel model;
  if (y.size() == 0) throw EstimationError("tree: empty response");

  struct Work {
    int node;
    std::vector<int> rows;
    int depth;
  };

  std::vector<int> all(static_cast<std::size_t>(y.size()));
  std::iota(all.begin(), all.end(), 0);
  model.nodes.push_back(TreeNode{});
  std::vector<Work> stack;
  stack.push_back({0, std::move(all), 0});

  while (!stack.empty()) {
    Work w = std::move(stack.back());
    stack.pop_back();
    TreeNode& node = model.nodes[static_cast<std::size_t>(w.node)];

    double sum = 0.0;
    for (int r : w.rows) sum += y[r];
    node.value = sum / static_cast<double>(w.rows.size());

    if (w.depth >= max_depth ||
        w.rows.size() < 2 * static_cast<std::size_t>(min_leaf) || X.cols() == 0)
      continue;

    // per-column split search: independent kernels, combined serially so
    // ties resolve to the lowest column index
    std::vector<Split> per_col(static_cast<std::size_t>(X.cols()));
    parallel_for(static_cast<std::size_t>(X.cols()), [&](std::size_t j) {
      per_col[j] = best_split_on_column(X, y, w.rows, static_cast<int>(j), min_leaf);
    });
    int best_col = -1;
    Split best;
    for (std::size_t j = 0; j < per_col.size(); ++j) {
      if (per_col[j].found && per_col[j].gain > best.gain + 1e-12) {
        best = per_col[j];
        best_col = static_cast<int>(j);
      }
    }
    if (best_col < 0) continue;

    std::vector<int> left, right;
    for (int r : w.rows)
      (X(r, best_col) <= best.threshold ? left : right).push_back(r);
    if (left.size() < static_cast<std::size_t>(min_leaf) ||
        right.size() < static_cast<std::size_t>(min_leaf))
      continue;

    int li = static_cast<int>(model.nodes.size());
    model.nodes.push_back(TreeNode{});
    int ri = static_cast<int>(model.nodes.size());
    model.nodes.push_back(TreeNode{});
    // re-reference: push_back may have reallocated
    TreeNode& node2 = model.nodes[static_cast<std::size_t>(w.node)];
    node2.col = best_col;
    node2.threshold = best.threshold;
    node2.left = li;
    node2.right = ri;
    stack.push_back({ri, std::move(right), w.depth + 1});
    stack.push_back({li, std::move(left), w.depth + 1});
  }
  return model;
}

int TreeModel::leaf_index(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int i = 0;
  while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
    const TreeNode& nd = nodes[static_cast<std::size_t>(i)];
    i = row[nd.col] <= nd.threshold ? nd.left : nd.right;
  }
  return i;
}

double TreeModel::predict_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  return nodes[static_cast<std::size_t>(leaf_index(row))].value;
}

VectorXd TreeModel::predict(const MatrixXd& X) const {
  VectorXd out(X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[i] = predict_row(X.row(i));
  return out;
}

std::shared_ptr<const FittedModel> fit_regression_tree(const MatrixXd& X,
                                                       const VectorXd& y,
                                                       Task task,
                                                       const Hyperparams& hp) {
  auto model = std::make_shared<TreeModel>(
      grow_tree(X, y, hp.tree_max_depth, hp.tree_min_leaf));
  model->task = task;
  return model;
}

}  // namespace maskrr
