#include "maskrr/simlab.hpp"

#include <cmath>

#include "maskrr/parallel.hpp"
#include "maskrr/rng.hpp"

namespace maskrr {

namespace {

double propagate(const std::vector<TermSpec>& terms,
                 const Eigen::Ref<const Eigen::RowVectorXd>& w, double latent) {
  double s = 0.0;
  for (const auto& t : terms) {
    double v = t.w_index < 0 ? latent : w[t.w_index];
    double x = v;
    for (int k = 1; k < t.power; ++k) x *= v;
    s += t.coef * x;
  }
  return s;
}

double raw_moment(const CovariateSpec& c, int power) {
  if (c.kind == CovariateSpec::Uniform) {
    double lo = c.p1, hi = c.p2;
    double p1 = static_cast<double>(power + 1);
    return (std::pow(hi, p1) - std::pow(lo, p1)) / (p1 * (hi - lo));
  }
  double m = c.p1, s = c.p2;
  switch (power) {
    case 1: return m;
    case 2: return m * m + s * s;
    case 3: return m * m * m + 3.0 * m * s * s;
    default:
      throw EstimationError("raw_moment: power must be 1, 2, or 3");
  }
}

double draw_covariate(const CovariateSpec& c, Rng& rng) {
  if (c.kind == CovariateSpec::Uniform)
    return c.p1 + (c.p2 - c.p1) * rng.uniform();
  return c.p1 + c.p2 * rng.normal();
}

// The latent variable, when present, is uniform on (-1,1): bounded support
// keeps the outcome floor intact and admits exact quadrature.
const CovariateSpec kLatentSpec{"latent", CovariateSpec::Uniform, -1.0, 1.0};

// Gauss-Legendre nodes/weights on [-1,1] via the Golub-Welsch eigenproblem.
void gauss_legendre(int m, std::vector<double>& nodes,
                    std::vector<double>& weights) {
  MatrixXd J = MatrixXd::Zero(m, m);
  for (int k = 1; k < m; ++k) {
    double b = k / std::sqrt(4.0 * k * k - 1.0);
    J(k - 1, k) = b;
    J(k, k - 1) = b;
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(J);
  nodes.resize(static_cast<std::size_t>(m));
  weights.resize(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) {
    nodes[static_cast<std::size_t>(k)] = es.eigenvalues()[k];
    double v0 = es.eigenvectors()(0, k);
    weights[static_cast<std::size_t>(k)] = 2.0 * v0 * v0;
  }
}

}  // namespace

std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::BothCorrect: return "both_correct";
    case Scenario::QMisspecified: return "q_misspecified";
    case Scenario::GMisspecified: return "g_misspecified";
    case Scenario::BothMisspecified: return "both_misspecified";
  }
  throw ConfigError("unknown scenario");
}

Scenario scenario_from_name(const std::string& name) {
  for (Scenario s : {Scenario::BothCorrect, Scenario::QMisspecified, Scenario::GMisspecified,
                     Scenario::BothMisspecified})
    if (scenario_name(s) == name) return s;
  throw ConfigError("unknown scenario: '" + name + "'");
}

DgpSpec dgp_from_name(const std::string& name) {
  if (name == "randomized_linear") return dgp_randomized_linear();
  if (name == "confounded_additive") return dgp_confounded_additive();
  if (name == "latent_confounder") return dgp_latent_confounder();
  throw ConfigError("unknown data-generating process: '" + name + "'");
}

// ---- shipped processes ----

DgpSpec dgp_randomized_linear() {
  DgpSpec d;
  d.name = "randomized_linear";
  d.covariates = {{"W1", CovariateSpec::Uniform, -1.0, 1.0}};
  d.randomized = true;
  d.a_prob = 0.5;
  d.y_intercept = 0.40;
  d.y_effect = -0.15;
  d.y_terms = {{0, 0.20, 1}};
  d.noise_shape = 2.0;
  d.noise_scale = 0.05;
  return d;
}

DgpSpec dgp_confounded_additive() {
  DgpSpec d;
  d.name = "confounded_additive";
  d.covariates = {{"W1", CovariateSpec::Uniform, -1.0, 1.0},
                  {"W2", CovariateSpec::Uniform, -1.0, 1.0},
                  {"W3", CovariateSpec::Uniform, -1.0, 1.0}};
  d.a_intercept = 0.0;
  d.a_terms = {{0, 1.2, 1}, {1, 0.8, 1}, {2, -0.6, 1}};
  d.y_intercept = 0.95;
  d.y_effect = -0.15;
  d.y_terms = {{0, 0.50, 1}, {1, 0.30, 2}, {2, 0.25, 3}};
  d.noise_shape = 2.0;
  d.noise_scale = 0.05;
  return d;
}

DgpSpec dgp_latent_confounder() {
  DgpSpec d;
  d.name = "latent_confounder";
  d.covariates = {{"W1", CovariateSpec::Uniform, -1.0, 1.0}};
  d.has_latent = true;
  d.a_intercept = 0.0;
  d.a_terms = {{0, 0.3, 1}, {-1, 1.2, 1}};
  d.y_intercept = 0.85;
  d.y_effect = -0.12;
  d.y_terms = {{0, 0.30, 1}, {-1, 0.40, 1}};
  d.noise_shape = 2.0;
  d.noise_scale = 0.05;
  return d;
}

// ---- simulation ----

SimDataset simulate_dataset(const DgpSpec& dgp, int n, std::uint64_t seed) {
  if (n < 1) throw EstimationError("simulate_dataset: n must be positive");
  const int p = static_cast<int>(dgp.covariates.size());

  SimDataset ds;
  ds.W.values.resize(n, p);
  for (const auto& c : dgp.covariates) ds.W.names.push_back(c.name);
  ds.A.resize(n);
  ds.Y.resize(n);
  ds.Y1.resize(n);
  ds.Y0.resize(n);

  Rng rng(mix_seed(seed));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j)
      ds.W.values(i, j) = draw_covariate(dgp.covariates[static_cast<std::size_t>(j)], rng);
    double latent = dgp.has_latent ? draw_covariate(kLatentSpec, rng) : 0.0;

    double p1 = dgp.randomized
                    ? dgp.a_prob
                    : expit(dgp.a_intercept +
                            propagate(dgp.a_terms, ds.W.values.row(i), latent));
    if (p1 <= 0.0 || p1 >= 1.0)
      throw EstimationError("simulate_dataset: degenerate exposure probability");
    ds.A[i] = rng.uniform() < p1 ? 1.0 : 0.0;

    double base = dgp.y_intercept + propagate(dgp.y_terms, ds.W.values.row(i), latent);
    double noise = rng.gamma(dgp.noise_shape, dgp.noise_scale);
    double y1 = 1.0 + base + dgp.y_effect + noise;
    double y0 = 1.0 + base + noise;
    if (y1 < 1.0 || y0 < 1.0)
      throw EstimationError(
          "simulate_dataset: outcome equation fell below the growth floor");
    ds.Y1[i] = y1;
    ds.Y0[i] = y0;
    ds.Y[i] = ds.A[i] == 1.0 ? y1 : y0;
  }
  return ds;
}

SimTruth true_parameters(const DgpSpec& dgp) {
  double base = dgp.y_intercept + dgp.noise_shape * dgp.noise_scale;
  for (const auto& t : dgp.y_terms) {
    const CovariateSpec& c =
        t.w_index < 0 ? kLatentSpec
                      : dgp.covariates[static_cast<std::size_t>(t.w_index)];
    base += t.coef * raw_moment(c, t.power);
  }
  SimTruth tr;
  tr.psi0 = 1.0 + base;
  tr.psi1 = 1.0 + base + dgp.y_effect;
  tr.crd = tr.psi1 - tr.psi0;
  tr.crr = tr.psi1 / tr.psi0;
  return tr;
}

SimTruth true_parameters_mc(const DgpSpec& dgp, long long draws,
                            std::uint64_t seed) {
  // chunked accumulation with per-chunk streams; combined serially
  const long long chunk = 100000;
  const long long n_chunks = (draws + chunk - 1) / chunk;
  std::vector<double> s1(static_cast<std::size_t>(n_chunks), 0.0);
  std::vector<double> s0(static_cast<std::size_t>(n_chunks), 0.0);
  std::vector<long long> cnt(static_cast<std::size_t>(n_chunks), 0);
  parallel_for(static_cast<std::size_t>(n_chunks), [&](std::size_t c) {
    long long lo = static_cast<long long>(c) * chunk;
    long long hi = std::min(draws, lo + chunk);
    int n = static_cast<int>(hi - lo);
    SimDataset ds = simulate_dataset(dgp, n, derive_seed(seed, c));
    s1[c] = ds.Y1.sum();
    s0[c] = ds.Y0.sum();
    cnt[c] = n;
  });
  double t1 = 0.0, t0 = 0.0;
  long long total = 0;
  for (std::size_t c = 0; c < s1.size(); ++c) {
    t1 += s1[c];
    t0 += s0[c];
    total += cnt[c];
  }
  SimTruth tr;
  tr.psi1 = t1 / static_cast<double>(total);
  tr.psi0 = t0 / static_cast<double>(total);
  tr.crd = tr.psi1 - tr.psi0;
  tr.crr = tr.psi1 / tr.psi0;
  return tr;
}

SimTruth observable_parameters(const DgpSpec& dgp, long long draws,
                               std::uint64_t seed) {
  if (!dgp.has_latent) return true_parameters(dgp);
  if (dgp.randomized)
    throw EstimationError("observable_parameters: randomized latent design");

  std::vector<double> nodes, weights;
  gauss_legendre(48, nodes, weights);
  const double noise_mean = dgp.noise_shape * dgp.noise_scale;

  Rng rng(mix_seed(seed));
  const int p = static_cast<int>(dgp.covariates.size());
  Eigen::RowVectorXd w(p);
  double acc1 = 0.0, acc0 = 0.0;
  for (long long i = 0; i < draws; ++i) {
    for (int j = 0; j < p; ++j)
      w[j] = draw_covariate(dgp.covariates[static_cast<std::size_t>(j)], rng);
    // integrate the latent variable exactly: E[Y | A=a, W=w]
    double den1 = 0.0, den0 = 0.0, num1 = 0.0, num0 = 0.0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      double u = nodes[k];
      double wt = 0.5 * weights[k];  // density of U(-1,1)
      double pa = expit(dgp.a_intercept + propagate(dgp.a_terms, w, u));
      double base = 1.0 + dgp.y_intercept + propagate(dgp.y_terms, w, u) + noise_mean;
      den1 += wt * pa;
      den0 += wt * (1.0 - pa);
      num1 += wt * pa * (base + dgp.y_effect);
      num0 += wt * (1.0 - pa) * base;
    }
    acc1 += num1 / den1;
    acc0 += num0 / den0;
  }
  SimTruth tr;
  tr.psi1 = acc1 / static_cast<double>(draws);
  tr.psi0 = acc0 / static_cast<double>(draws);
  tr.crd = tr.psi1 - tr.psi0;
  tr.crr = tr.psi1 / tr.psi0;
  return tr;
}

// ---- experiments ----

namespace {

struct RepResult {
  bool ok = false;
  std::string error;
  double rd = 0.0, rr = 0.0, se_rd = 0.0;
  double rd_lo = 0.0, rd_hi = 0.0, rr_lo = 0.0, rr_hi = 0.0;
};

LearnerSpec scenario_learner(bool correct) {
  LearnerSpec spec;
  spec.algorithm = correct ? Algorithm::AdditiveSpline : Algorithm::EmpiricalMean;
  return spec;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& config) {
  if (config.replicates < 1)
    throw EstimationError("run_experiment: replicates must be positive");
  const std::size_t R = static_cast<std::size_t>(config.replicates);
  const std::size_t E = config.estimators.size();
  if (E == 0) throw EstimationError("run_experiment: no estimators");

  const bool q_correct = config.scenario == Scenario::BothCorrect ||
                         config.scenario == Scenario::GMisspecified;
  const bool g_correct = config.scenario == Scenario::BothCorrect ||
                         config.scenario == Scenario::QMisspecified;

  std::vector<RepResult> slots(R * E);
  parallel_for(R, [&](std::size_t r) {
    std::uint64_t rep_seed = derive_seed(config.seed, r);
    SimDataset ds;
    try {
      ds = simulate_dataset(config.dgp, config.n, rep_seed);
    } catch (const std::exception& ex) {
      for (std::size_t e = 0; e < E; ++e) {
        slots[r * E + e].ok = false;
        slots[r * E + e].error = ex.what();
      }
      return;
    }
    for (std::size_t e = 0; e < E; ++e) {
      RepResult& out = slots[r * E + e];
      try {
        const std::string& est = config.estimators[e];
        SuperLearnerConfig qc;
        qc.library = {scenario_learner(q_correct)};
        qc.K = config.K;
        qc.loss = MetaLoss::SquaredError;
        qc.seed = derive_seed(rep_seed, 11);
        SuperLearnerConfig gc;
        gc.library = {scenario_learner(g_correct)};
        gc.K = config.K;
        gc.loss = MetaLoss::LogLoss;
        gc.stratify = true;
        gc.seed = derive_seed(rep_seed, 12);

        EffectEstimate res;
        if (est == "tmle")
          res = tmle_estimate(ds.W, ds.A, ds.Y, qc, gc, config.gbound);
        else if (est == "gcomp")
          res = gcomp_estimate(ds.W, ds.A, ds.Y, qc);
        else if (est == "unadjusted")
          res = unadjusted_estimate(ds.A, ds.Y);
        else
          throw ConfigError("unknown estimator: " + est);

        out.ok = true;
        out.rd = res.rd;
        out.rr = res.rr;
        out.se_rd = res.se_rd;
        out.rd_lo = res.rd_lo;
        out.rd_hi = res.rd_hi;
        out.rr_lo = res.rr_lo;
        out.rr_hi = res.rr_hi;
      } catch (const std::exception& ex) {
        out.ok = false;
        out.error = ex.what();
      }
    }
  });

  ExperimentReport report;
  report.config = config;
  report.truth = true_parameters(config.dgp);

  for (std::size_t e = 0; e < E; ++e) {
    EstimatorPerformance perf;
    perf.estimator = config.estimators[e];
    std::vector<double> rds, rrs;
    double se_sum = 0.0, wrd = 0.0, wrr = 0.0;
    int cover_rd = 0, cover_rr = 0;
    for (std::size_t r = 0; r < R; ++r) {
      const RepResult& res = slots[r * E + e];
      if (!res.ok) {
        if (perf.failures.size() < 10) perf.failures.push_back(res.error);
        continue;
      }
      ++perf.n_ok;
      rds.push_back(res.rd);
      rrs.push_back(res.rr);
      se_sum += res.se_rd;
      wrd += res.rd_hi - res.rd_lo;
      wrr += res.rr_hi - res.rr_lo;
      cover_rd += res.rd_lo <= report.truth.crd && report.truth.crd <= res.rd_hi;
      cover_rr += res.rr_lo <= report.truth.crr && report.truth.crr <= res.rr_hi;
    }
    int n_fail = config.replicates - perf.n_ok;
    if (static_cast<double>(n_fail) >
        config.max_failure_rate * config.replicates) {
      std::string first = perf.failures.empty() ? "(none recorded)"
                                                : perf.failures.front();
      throw EstimationError("run_experiment: estimator '" + perf.estimator +
                            "' failed on " + std::to_string(n_fail) + "/" +
                            std::to_string(config.replicates) +
                            " replicates; first error: " + first);
    }
    if (perf.n_ok >= 2) {
      perf.mean_rd = mean(rds);
      perf.mean_rr = mean(rrs);
      perf.bias_rd = perf.mean_rd - report.truth.crd;
      perf.bias_rr = perf.mean_rr - report.truth.crr;
      perf.sd_rd = sample_sd(rds);
      perf.sd_rr = sample_sd(rrs);
      double m2rd = 0.0, m2rr = 0.0;
      for (double v : rds) m2rd += (v - report.truth.crd) * (v - report.truth.crd);
      for (double v : rrs) m2rr += (v - report.truth.crr) * (v - report.truth.crr);
      perf.rmse_rd = std::sqrt(m2rd / static_cast<double>(rds.size()));
      perf.rmse_rr = std::sqrt(m2rr / static_cast<double>(rrs.size()));
      perf.mean_se_rd = se_sum / perf.n_ok;
      perf.coverage_rd = static_cast<double>(cover_rd) / perf.n_ok;
      perf.coverage_rr = static_cast<double>(cover_rr) / perf.n_ok;
      perf.width_rd = wrd / perf.n_ok;
      perf.width_rr = wrr / perf.n_ok;
    }
    report.performance.push_back(std::move(perf));
  }
  return report;
}

}  // namespace maskrr
