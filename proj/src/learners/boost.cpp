#include <cmath>

#include "maskrr/models.hpp"

namespace maskrr {

namespace {

double squared_loss(const VectorXd& y, const VectorXd& f) {
  return (y - f).squaredNorm() / static_cast<double>(y.size());
}

double logistic_loss(const VectorXd& y, const VectorXd& f) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    double p = clip(expit(f[i]), kProbClip, 1.0 - kProbClip);
    s -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
  }
  return s / static_cast<double>(y.size());
}

}  // namespace

VectorXd BoostModel::raw_score(const MatrixXd& X) const {
  VectorXd f = VectorXd::Constant(X.rows(), f0);
  for (std::size_t t = 0; t < trees.size(); ++t)
    f += learning_rate * scale[t] * trees[t].predict(X);
  return f;
}

VectorXd BoostModel::predict(const MatrixXd& X) const {
  VectorXd f = raw_score(X);
  if (task == Task::BinaryProbability)
    for (Eigen::Index i = 0; i < f.size(); ++i) f[i] = expit(f[i]);
  return f;
}

std::shared_ptr<const FittedModel> fit_gradient_boosting(const MatrixXd& X,
                                                         const VectorXd& y,
                                                         Task task,
                                                         const Hyperparams& hp) {
  auto model = std::make_shared<BoostModel>();
  model->task = task;
  model->learning_rate = hp.boost_learning_rate;

  const bool binary = task == Task::BinaryProbability;
  if (binary) {
    double ybar = clip(y.mean(), kProbClip, 1.0 - kProbClip);
    model->f0 = logit(ybar);
  } else {
    model->f0 = y.mean();
  }

  VectorXd f = VectorXd::Constant(y.size(), model->f0);
  auto loss = [&](const VectorXd& fv) {
    return binary ? logistic_loss(y, fv) : squared_loss(y, fv);
  };
  model->train_loss.push_back(loss(f));

  for (int round = 0; round < hp.boost_rounds; ++round) {
    // gradient residuals
    VectorXd r(y.size());
    if (binary) {
      for (Eigen::Index i = 0; i < y.size(); ++i) r[i] = y[i] - expit(f[i]);
    } else {
      r = y - f;
    }

    TreeModel tree = grow_tree(X, r, hp.boost_depth, hp.boost_min_leaf);

    if (binary) {
      // replace leaf means with one Newton step on the logistic loss
      std::vector<double> num(tree.nodes.size(), 0.0), den(tree.nodes.size(), 0.0);
      for (Eigen::Index i = 0; i < y.size(); ++i) {
        int leaf = tree.leaf_index(X.row(i));
        double p = expit(f[i]);
        num[static_cast<std::size_t>(leaf)] += y[i] - p;
        den[static_cast<std::size_t>(leaf)] += std::max(p * (1.0 - p), 1e-12);
      }
      for (std::size_t k = 0; k < tree.nodes.size(); ++k)
        if (tree.nodes[k].is_leaf())
          tree.nodes[k].value = clip(num[k] / std::max(den[k], 1e-12), -4.0, 4.0);
    }

    // backtracking keeps the training loss non-increasing round over round
    VectorXd step = tree.predict(X);
    double prev = model->train_loss.back();
    double sc = 1.0;
    VectorXd f_new;
    double cur = prev;
    bool ok = false;
    for (int half = 0; half < 30; ++half) {
      f_new = f + hp.boost_learning_rate * sc * step;
      cur = loss(f_new);
      if (cur <= prev + 1e-12) {
        ok = true;
        break;
      }
      sc *= 0.5;
    }
    if (!ok) break;  // no usable step: stop boosting early

    f = f_new;
    model->trees.push_back(std::move(tree));
    model->scale.push_back(sc);
    model->train_loss.push_back(cur);
  }
  return model;
}

}  // namespace maskrr
