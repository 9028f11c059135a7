#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "maskrr/estimators.hpp"

namespace maskrr {

// ---- data-generating process descriptors ----

// Structural equations are parameterized as named additive terms so that
// every shipped process is fully described by data, not code.

struct CovariateSpec {
  std::string name;
  enum Kind { Uniform, Normal } kind = Uniform;
  double p1 = -1.0, p2 = 1.0;  // uniform: (lo, hi); normal: (mean, sd)
};

struct TermSpec {
  int w_index = 0;    // covariate index; -1 refers to the latent variable
  double coef = 0.0;  // contribution: coef * W^power
  int power = 1;      // 1, 2, or 3
};

struct DgpSpec {
  std::string name;
  std::vector<CovariateSpec> covariates;

  // exposure: logit P(A=1 | W, U) = a_intercept + sum(a_terms)
  // (randomized designs use a fixed probability instead)
  bool randomized = false;
  double a_prob = 0.5;
  double a_intercept = 0.0;
  std::vector<TermSpec> a_terms;

  // outcome: Y = 1 + y_intercept + y_effect*A + sum(y_terms) + noise,
  // noise ~ Gamma(noise_shape, noise_scale) > 0 so that Y >= 1 whenever the
  // deterministic part is non-negative
  double y_intercept = 0.0;
  double y_effect = 0.0;
  std::vector<TermSpec> y_terms;
  double noise_shape = 2.0;
  double noise_scale = 0.05;

  bool has_latent = false;  // latent U ~ Uniform(-1,1), excluded from W
};

// Shipped processes.
DgpSpec dgp_randomized_linear();    // randomized exposure, linear outcome
DgpSpec dgp_confounded_additive();  // measured confounding, additive truth
DgpSpec dgp_latent_confounder();    // unmeasured confounder (identification fails)

// ---- simulation ----

struct SimDataset {
  Table W;
  VectorXd A, Y;
  VectorXd Y1, Y0;  // counterfactual outcomes (for truth checks)
};

SimDataset simulate_dataset(const DgpSpec& dgp, int n, std::uint64_t seed);

struct SimTruth {
  double psi1 = 0.0, psi0 = 0.0;
  double crr = 0.0;  // counterfactual relative ratio psi1/psi0
  double crd = 0.0;  // counterfactual difference psi1-psi0
};

// Closed-form counterfactual truth from the structural equations.
SimTruth true_parameters(const DgpSpec& dgp);

// Monte-Carlo oracle for the same quantities.
SimTruth true_parameters_mc(const DgpSpec& dgp, long long draws,
                            std::uint64_t seed);

// The covariate-adjusted observable functional E_W E[Y | A=a, W].  Equals
// the counterfactual truth when all confounders are measured; under a
// latent confounder it is the quantity every W-adjusted estimator targets
// instead.  Computed by Monte Carlo over W with exact integration over the
// latent variable (Gauss-Legendre quadrature on its bounded support).
SimTruth observable_parameters(const DgpSpec& dgp, long long draws,
                               std::uint64_t seed);

// ---- repeated-sampling experiments ----

enum class Scenario {
  BothCorrect,
  QMisspecified,
  GMisspecified,
  BothMisspecified,
};

std::string scenario_name(Scenario s);
Scenario scenario_from_name(const std::string& name);

// Shipped process lookup by name ("randomized_linear", "confounded_additive",
// "latent_confounder").
DgpSpec dgp_from_name(const std::string& name);

struct ExperimentConfig {
  DgpSpec dgp;
  int n = 500;
  int replicates = 200;
  Scenario scenario = Scenario::BothCorrect;
  std::vector<std::string> estimators = {"tmle", "unadjusted"};
  std::uint64_t seed = 1;
  int K = 10;
  double gbound = 0.01;
  double max_failure_rate = 0.05;
};

struct EstimatorPerformance {
  std::string estimator;
  int n_ok = 0;
  std::vector<std::string> failures;
  double mean_rd = 0.0, mean_rr = 0.0;
  double bias_rd = 0.0, bias_rr = 0.0;
  double sd_rd = 0.0, sd_rr = 0.0;
  double rmse_rd = 0.0, rmse_rr = 0.0;
  double mean_se_rd = 0.0;
  double coverage_rd = 0.0, coverage_rr = 0.0;
  double width_rd = 0.0, width_rr = 0.0;
};

struct ExperimentReport {
  ExperimentConfig config;
  SimTruth truth;
  std::vector<EstimatorPerformance> performance;
};

// Runs the replicate grid (parallel, deterministic per-replicate seeds) and
// aggregates bias / variance / coverage per estimator.  Aborts with
// EstimationError if any estimator's failure rate exceeds the configured
// maximum.
ExperimentReport run_experiment(const ExperimentConfig& config);

}  // namespace maskrr
