#include <algorithm>

#include "maskrr/models.hpp"

namespace maskrr {

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::EmpiricalMean: return "mean";
    case Algorithm::AdditiveSpline: return "spline";
    case Algorithm::RegressionTree: return "tree";
    case Algorithm::GradientBoosting: return "boost";
    case Algorithm::AdaptiveSplines: return "mars";
  }
  throw ConfigError("unknown algorithm");
}

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "mean") return Algorithm::EmpiricalMean;
  if (name == "spline") return Algorithm::AdditiveSpline;
  if (name == "tree") return Algorithm::RegressionTree;
  if (name == "boost") return Algorithm::GradientBoosting;
  if (name == "mars") return Algorithm::AdaptiveSplines;
  throw ConfigError("unknown learner name: '" + name + "'");
}

std::string LearnerSpec::name() const {
  std::string s = algorithm_name(algorithm);
  if (screen) s += "+screen";
  return s;
}

FittedLearner fit_learner(const LearnerSpec& spec, const Table& X,
                          const VectorXd& y) {
  if (X.n() != y.size())
    throw EstimationError("fit_learner: X rows and y length differ");
  if (y.size() == 0) throw EstimationError("fit_learner: empty data");

  FittedLearner out;
  out.spec = spec;
  out.training_columns = X.names;
  out.n_train = y.size();

  // constant response: every algorithm degenerates to that constant
  if (y.size() > 0 && y.minCoeff() == y.maxCoeff()) {
    out.retained_columns = {};
    out.model = std::make_shared<ConstantModel>(y[0]);
    return out;
  }

  // screening (exempted columns are always retained, in original order)
  if (spec.screen && X.p() > 0) {
    const auto& sc = *spec.screen;
    std::vector<bool> exempt(X.names.size(), false);
    std::vector<Eigen::Index> competing;
    for (std::size_t j = 0; j < X.names.size(); ++j) {
      if (std::find(sc.always_keep.begin(), sc.always_keep.end(), X.names[j]) !=
          sc.always_keep.end())
        exempt[j] = true;
      else
        competing.push_back(static_cast<Eigen::Index>(j));
    }
    std::vector<bool> keep(X.names.size(), false);
    if (!competing.empty()) {
      MatrixXd Xc(X.n(), static_cast<Eigen::Index>(competing.size()));
      for (std::size_t c = 0; c < competing.size(); ++c)
        Xc.col(static_cast<Eigen::Index>(c)) = X.values.col(competing[c]);
      auto mask = screen_correlation(Xc, y, sc.alpha, sc.min_keep);
      for (std::size_t c = 0; c < competing.size(); ++c)
        keep[static_cast<std::size_t>(competing[c])] = mask[c];
    }
    for (std::size_t j = 0; j < X.names.size(); ++j)
      if (exempt[j] || keep[j]) out.retained_columns.push_back(X.names[j]);
  } else {
    out.retained_columns = X.names;
  }

  MatrixXd Xr(X.n(), static_cast<Eigen::Index>(out.retained_columns.size()));
  for (std::size_t j = 0; j < out.retained_columns.size(); ++j)
    Xr.col(static_cast<Eigen::Index>(j)) =
        X.values.col(X.col_required(out.retained_columns[j]));

  switch (spec.algorithm) {
    case Algorithm::EmpiricalMean:
      out.model = fit_empirical_mean(Xr, y, spec.task, spec.hp);
      break;
    case Algorithm::AdditiveSpline:
      out.model = fit_additive_spline(Xr, y, spec.task, spec.hp);
      break;
    case Algorithm::RegressionTree:
      out.model = fit_regression_tree(Xr, y, spec.task, spec.hp);
      break;
    case Algorithm::GradientBoosting:
      out.model = fit_gradient_boosting(Xr, y, spec.task, spec.hp);
      break;
    case Algorithm::AdaptiveSplines:
      out.model = fit_adaptive_splines(Xr, y, spec.task, spec.hp);
      break;
  }
  return out;
}

VectorXd predict(const FittedLearner& fit, const Table& X) {
  MatrixXd Xr(X.n(), static_cast<Eigen::Index>(fit.retained_columns.size()));
  for (std::size_t j = 0; j < fit.retained_columns.size(); ++j) {
    int c = X.col(fit.retained_columns[j]);
    if (c < 0)
      throw EstimationError("predict: missing training column '" +
                            fit.retained_columns[j] + "'");
    Xr.col(static_cast<Eigen::Index>(j)) = X.values.col(c);
  }
  VectorXd raw = fit.model->predict(Xr);
  double lo = 0.0, hi = 1.0;
  if (fit.spec.task == Task::BinaryProbability) {
    lo = kProbClip;
    hi = 1.0 - kProbClip;
  }
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw[i] = clip(raw[i], lo, hi);
  return raw;
}

}  // namespace maskrr
