#pragma once

#include "maskrr/stats.hpp"
#include "maskrr/super_learner.hpp"

namespace maskrr {

// ---- outcome bounding ----

struct OutcomeBounds {
  double lo = 0.0, hi = 1.0;
};

// Empirical range of Y; errors when Y is constant.
OutcomeBounds bound_outcome(const VectorXd& y);
VectorXd to_unit(const VectorXd& y, const OutcomeBounds& b);
double from_unit(double ystar, const OutcomeBounds& b);

// ---- nuisance estimation ----

struct NuisanceFits {
  SuperLearnerFit q_fit;  // outcome regression on (A, W), unit scale
  SuperLearnerFit g_fit;  // propensity P(A=1 | W)
  VectorXd qbar1, qbar0, qbar_obs;
  VectorXd g1;      // truncated to [gbound, 1-gbound]
  VectorXd g1_raw;  // pre-truncation
  double gbound = 0.01;
  std::vector<std::string> warnings;
};

// Fits the outcome regression (exposure column exempt from screening) and
// the propensity score.  Raw propensities outside (0.01, 0.99) raise a
// positivity warning (non-fatal, recorded in warnings).
NuisanceFits fit_nuisance(const Table& W, const VectorXd& A,
                          const VectorXd& ystar,
                          const SuperLearnerConfig& q_config,
                          const SuperLearnerConfig& g_config, double gbound);

// ---- targeting step ----

struct Fluctuation {
  double eps0 = 0.0, eps1 = 0.0;
  int iterations = 0;
  double score0 = 0.0, score1 = 0.0;  // mean clever-covariate residuals
  VectorXd qstar1, qstar0, qstar_obs;
};

// Two-parameter logistic fluctuation of the outcome regression along the
// clever covariates H1 = A/g1, H0 = (1-A)/(1-g1), solved by Newton-Raphson
// with step halving.  The two coordinates are independent because H0*H1 = 0
// pointwise.  Throws EstimationError (with the iteration trace) when the
// score equations cannot be solved.
Fluctuation fluctuate(const NuisanceFits& nf, const VectorXd& A,
                      const VectorXd& ystar);

// ---- effect estimates ----

struct SlSummary {
  std::vector<std::string> learners;  // kept library entries, by name
  VectorXd weights;
  VectorXd cv_risk;  // per kept learner
  double cv_risk_combined = 0.0;
};

SlSummary summarize_sl(const SuperLearnerFit& fit);

struct EffectEstimate {
  std::string estimator;  // "tmle", "gcomp", "unadjusted"
  double psi1 = 0.0, psi0 = 0.0;
  double rr = 0.0, rd = 0.0;
  double se_psi1 = 0.0, se_psi0 = 0.0, se_rd = 0.0, se_log_rr = 0.0;
  double psi1_lo = 0.0, psi1_hi = 0.0, psi0_lo = 0.0, psi0_hi = 0.0;
  double rr_lo = 0.0, rr_hi = 0.0, rd_lo = 0.0, rd_hi = 0.0;
  VectorXd ic1, ic0;  // influence curves on the original outcome scale
  // diagnostics
  OutcomeBounds bounds;
  double eps0 = 0.0, eps1 = 0.0;
  double score0 = 0.0, score1 = 0.0;
  double mean_ic1 = 0.0, mean_ic0 = 0.0;
  SixNumber g_summary{};
  VectorXd g1;  // truncated propensities (empty for unadjusted)
  SlSummary q_sl, g_sl;  // empty when the estimator does not fit them
  std::vector<std::string> warnings;
};

EffectEstimate tmle_estimate(const Table& W, const VectorXd& A,
                             const VectorXd& Y,
                             const SuperLearnerConfig& q_config,
                             const SuperLearnerConfig& g_config,
                             double gbound);

// Plug-in estimate from the untargeted outcome regression.  Inference uses
// the same influence-curve formula with the marginal exposure probability
// in place of the fitted propensity (reported as non-robust).
EffectEstimate gcomp_estimate(const Table& W, const VectorXd& A,
                              const VectorXd& Y,
                              const SuperLearnerConfig& q_config);

EffectEstimate unadjusted_estimate(const VectorXd& A, const VectorXd& Y);

// Six-number summary (min / Q1 / median / mean / Q3 / max) of fitted
// propensities.
SixNumber propensity_summary(const VectorXd& g1);

}  // namespace maskrr
