#include "maskrr/models.hpp"

namespace maskrr {

std::shared_ptr<const FittedModel> fit_empirical_mean(const MatrixXd& X,
                                                      const VectorXd& y,
                                                      Task /*task*/,
                                                      const Hyperparams&) {
  (void)X;  // the marginal mean ignores covariates
  if (y.size() == 0) throw EstimationError("empirical mean: empty response");
  return std::make_shared<ConstantModel>(y.mean());
}

}  // namespace maskrr
