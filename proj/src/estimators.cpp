#include "maskrr/estimators.hpp"

#include <cmath>
#include <sstream>

#include "maskrr/rng.hpp"

namespace maskrr {

namespace {

constexpr double kZ95 = 1.959963984540054;  // Phi^{-1}(0.975)

void check_design(const VectorXd& A, const VectorXd& Y) {
  if (A.size() != Y.size() || A.size() < 4)
    throw EstimationError("estimator: need matching A and Y with n >= 4");
  int n1 = 0;
  for (Eigen::Index i = 0; i < A.size(); ++i) {
    if (A[i] != 0.0 && A[i] != 1.0)
      throw EstimationError("estimator: exposure must be binary 0/1");
    if (!std::isfinite(Y[i]))
      throw EstimationError("estimator: non-finite outcome");
    n1 += A[i] == 1.0;
  }
  if (n1 == 0 || n1 == static_cast<int>(A.size()))
    throw EstimationError("estimator: one exposure arm is empty");
}

// Fills ratio/difference estimates and IC-based Wald intervals from the
// per-arm means and influence curves.
void finish_inference(EffectEstimate& e) {
  const double n = static_cast<double>(e.ic1.size());
  auto ic_se = [&](const VectorXd& ic) {
    double m = ic.mean();
    double ss = (ic.array() - m).square().sum() / (n - 1.0);
    return std::sqrt(ss / n);
  };

  if (e.psi0 <= 0.0)
    throw EstimationError("estimator: psi0 <= 0, ratio undefined");
  e.rr = e.psi1 / e.psi0;
  e.rd = e.psi1 - e.psi0;

  e.mean_ic1 = e.ic1.mean();
  e.mean_ic0 = e.ic0.mean();

  e.se_psi1 = ic_se(e.ic1);
  e.se_psi0 = ic_se(e.ic0);
  e.psi1_lo = e.psi1 - kZ95 * e.se_psi1;
  e.psi1_hi = e.psi1 + kZ95 * e.se_psi1;
  e.psi0_lo = e.psi0 - kZ95 * e.se_psi0;
  e.psi0_hi = e.psi0 + kZ95 * e.se_psi0;

  VectorXd ic_rd = e.ic1 - e.ic0;
  e.se_rd = ic_se(ic_rd);
  e.rd_lo = e.rd - kZ95 * e.se_rd;
  e.rd_hi = e.rd + kZ95 * e.se_rd;

  // ratio interval on the log scale (delta method)
  VectorXd ic_lrr = e.ic1 / e.psi1 - e.ic0 / e.psi0;
  e.se_log_rr = ic_se(ic_lrr);
  e.rr_lo = std::exp(std::log(e.rr) - kZ95 * e.se_log_rr);
  e.rr_hi = std::exp(std::log(e.rr) + kZ95 * e.se_log_rr);
}

}  // namespace

OutcomeBounds bound_outcome(const VectorXd& y) {
  if (y.size() < 2) throw EstimationError("bound_outcome: too few outcomes");
  OutcomeBounds b{y.minCoeff(), y.maxCoeff()};
  if (b.hi <= b.lo)
    throw EstimationError("bound_outcome: outcome is constant");
  return b;
}

VectorXd to_unit(const VectorXd& y, const OutcomeBounds& b) {
  return (y.array() - b.lo) / (b.hi - b.lo);
}

double from_unit(double ystar, const OutcomeBounds& b) {
  return b.lo + ystar * (b.hi - b.lo);
}

NuisanceFits fit_nuisance(const Table& W, const VectorXd& A,
                          const VectorXd& ystar,
                          const SuperLearnerConfig& q_config,
                          const SuperLearnerConfig& g_config, double gbound) {
  if (gbound <= 0.0 || gbound >= 0.5)
    throw EstimationError("fit_nuisance: gbound must lie in (0, 0.5)");
  if (W.col("A") >= 0)
    throw EstimationError("fit_nuisance: covariate table may not contain 'A'");

  NuisanceFits nf;
  nf.gbound = gbound;

  // outcome regression on (A, W); the exposure column never gets screened out
  Table QX;
  QX.values.resize(W.n(), W.p() + 1);
  QX.names.reserve(static_cast<std::size_t>(W.p()) + 1);
  QX.names.push_back("A");
  QX.values.col(0) = A;
  for (Eigen::Index j = 0; j < W.p(); ++j) {
    QX.names.push_back(W.names[static_cast<std::size_t>(j)]);
    QX.values.col(j + 1) = W.values.col(j);
  }
  SuperLearnerConfig qc = q_config;
  for (auto& spec : qc.library)
    if (spec.screen) spec.screen->always_keep.push_back("A");
  nf.q_fit = sl_fit(qc, QX, ystar, Task::RegressionOnUnit);

  Table QX1 = QX, QX0 = QX;
  QX1.values.col(0).setOnes();
  QX0.values.col(0).setZero();
  nf.qbar1 = sl_predict(nf.q_fit, QX1);
  nf.qbar0 = sl_predict(nf.q_fit, QX0);
  nf.qbar_obs.resize(A.size());
  for (Eigen::Index i = 0; i < A.size(); ++i)
    nf.qbar_obs[i] = A[i] == 1.0 ? nf.qbar1[i] : nf.qbar0[i];

  // propensity score
  nf.g_fit = sl_fit(g_config, W, A, Task::BinaryProbability);
  nf.g1_raw = sl_predict(nf.g_fit, W);
  nf.g1 = nf.g1_raw;
  int alarms = 0;
  for (Eigen::Index i = 0; i < nf.g1.size(); ++i) {
    if (nf.g1_raw[i] < 0.01 || nf.g1_raw[i] > 0.99) ++alarms;
    nf.g1[i] = clip(nf.g1_raw[i], gbound, 1.0 - gbound);
  }
  if (alarms > 0)
    nf.warnings.push_back(
        "positivity: " + std::to_string(alarms) +
        " fitted propensities outside (0.01, 0.99) before truncation");
  for (const auto& w : nf.q_fit.warnings) nf.warnings.push_back("Q: " + w);
  for (const auto& w : nf.g_fit.warnings) nf.warnings.push_back("g: " + w);
  return nf;
}

Fluctuation fluctuate(const NuisanceFits& nf, const VectorXd& A,
                      const VectorXd& ystar) {
  const Eigen::Index n = A.size();
  // logit of the initial fit, clipped strictly inside (0,1)
  VectorXd off1(n), off0(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    off1[i] = logit(clip(nf.qbar1[i], kProbClip, 1.0 - kProbClip));
    off0[i] = logit(clip(nf.qbar0[i], kProbClip, 1.0 - kProbClip));
  }

  // The joint logistic MLE in (eps0, eps1) decouples: H0*H1 = 0 pointwise,
  // so the Hessian is diagonal and each arm solves its own 1-d problem.
  auto solve_arm = [&](int arm, std::string& trace, int& iters) {
    double eps = 0.0;
    const double tol = 1e-13;
    std::ostringstream tr;
    double score = 0.0;
    for (int it = 0; it < 100; ++it) {
      double sc = 0.0, hess = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<int>(A[i]) != arm) continue;
        double g = arm == 1 ? nf.g1[i] : 1.0 - nf.g1[i];
        double h = 1.0 / g;
        double mu = expit((arm == 1 ? off1[i] : off0[i]) + eps * h);
        sc += h * (ystar[i] - mu);
        hess += h * h * mu * (1.0 - mu);
      }
      sc /= static_cast<double>(n);
      hess /= static_cast<double>(n);
      score = sc;
      tr << (it ? " " : "") << sc;
      if (std::fabs(sc) < tol) {
        iters = it;
        return std::pair<double, double>(eps, sc);
      }
      if (hess <= 0.0) break;
      double step = sc / hess;
      // step halving on the score magnitude
      double best_eps = eps + step;
      for (int half = 0; half < 50; ++half) {
        double cand = eps + step;
        double cand_sc = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
          if (static_cast<int>(A[i]) != arm) continue;
          double g = arm == 1 ? nf.g1[i] : 1.0 - nf.g1[i];
          double h = 1.0 / g;
          double mu = expit((arm == 1 ? off1[i] : off0[i]) + cand * h);
          cand_sc += h * (ystar[i] - mu);
        }
        cand_sc /= static_cast<double>(n);
        if (std::fabs(cand_sc) < std::fabs(sc)) {
          best_eps = cand;
          break;
        }
        step *= 0.5;
        best_eps = cand;
      }
      eps = best_eps;
      iters = it + 1;
    }
    if (std::fabs(score) >= tol) {
      trace = tr.str();
      throw EstimationError(
          "fluctuation failed to converge for arm " + std::to_string(arm) +
          "; score trace: " + trace);
    }
    return std::pair<double, double>(eps, score);
  };

  Fluctuation fl;
  std::string trace;
  int it0 = 0, it1 = 0;
  auto [e0, s0] = solve_arm(0, trace, it0);
  auto [e1, s1] = solve_arm(1, trace, it1);
  fl.eps0 = e0;
  fl.eps1 = e1;
  fl.score0 = s0;
  fl.score1 = s1;
  fl.iterations = std::max(it0, it1);

  fl.qstar1.resize(n);
  fl.qstar0.resize(n);
  fl.qstar_obs.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    fl.qstar1[i] = expit(off1[i] + fl.eps1 / nf.g1[i]);
    fl.qstar0[i] = expit(off0[i] + fl.eps0 / (1.0 - nf.g1[i]));
    fl.qstar_obs[i] = A[i] == 1.0 ? fl.qstar1[i] : fl.qstar0[i];
  }
  return fl;
}

EffectEstimate tmle_estimate(const Table& W, const VectorXd& A,
                             const VectorXd& Y,
                             const SuperLearnerConfig& q_config,
                             const SuperLearnerConfig& g_config,
                             double gbound) {
  check_design(A, Y);
  const Eigen::Index n = A.size();

  EffectEstimate e;
  e.estimator = "tmle";
  e.bounds = bound_outcome(Y);
  VectorXd ystar = to_unit(Y, e.bounds);

  NuisanceFits nf = fit_nuisance(W, A, ystar, q_config, g_config, gbound);
  Fluctuation fl = fluctuate(nf, A, ystar);

  e.eps0 = fl.eps0;
  e.eps1 = fl.eps1;
  e.score0 = fl.score0;
  e.score1 = fl.score1;
  e.warnings = nf.warnings;
  e.g1 = nf.g1;
  e.g_summary = propensity_summary(nf.g1);
  e.q_sl = summarize_sl(nf.q_fit);
  e.g_sl = summarize_sl(nf.g_fit);

  const double span = e.bounds.hi - e.bounds.lo;
  double mean1 = fl.qstar1.mean(), mean0 = fl.qstar0.mean();
  e.psi1 = from_unit(mean1, e.bounds);
  e.psi0 = from_unit(mean0, e.bounds);

  e.ic1.resize(n);
  e.ic0.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double resid = span * (ystar[i] - fl.qstar_obs[i]);
    double h1 = A[i] / nf.g1[i];
    double h0 = (1.0 - A[i]) / (1.0 - nf.g1[i]);
    e.ic1[i] = h1 * resid + span * fl.qstar1[i] + e.bounds.lo - e.psi1;
    e.ic0[i] = h0 * resid + span * fl.qstar0[i] + e.bounds.lo - e.psi0;
  }
  finish_inference(e);
  return e;
}

EffectEstimate gcomp_estimate(const Table& W, const VectorXd& A,
                              const VectorXd& Y,
                              const SuperLearnerConfig& q_config) {
  check_design(A, Y);
  const Eigen::Index n = A.size();

  EffectEstimate e;
  e.estimator = "gcomp";
  e.bounds = bound_outcome(Y);
  VectorXd ystar = to_unit(Y, e.bounds);

  Table QX;
  QX.values.resize(W.n(), W.p() + 1);
  QX.names.push_back("A");
  QX.values.col(0) = A;
  for (Eigen::Index j = 0; j < W.p(); ++j) {
    QX.names.push_back(W.names[static_cast<std::size_t>(j)]);
    QX.values.col(j + 1) = W.values.col(j);
  }
  SuperLearnerConfig qc = q_config;
  for (auto& spec : qc.library)
    if (spec.screen) spec.screen->always_keep.push_back("A");
  SuperLearnerFit q_fit = sl_fit(qc, QX, ystar, Task::RegressionOnUnit);

  Table QX1 = QX, QX0 = QX;
  QX1.values.col(0).setOnes();
  QX0.values.col(0).setZero();
  VectorXd qbar1 = sl_predict(q_fit, QX1);
  VectorXd qbar0 = sl_predict(q_fit, QX0);

  const double span = e.bounds.hi - e.bounds.lo;
  e.psi1 = from_unit(qbar1.mean(), e.bounds);
  e.psi0 = from_unit(qbar0.mean(), e.bounds);

  // IC evaluated at the untargeted fit, with the marginal exposure
  // probability standing in for the propensity (non-robust inference)
  double p1 = A.mean();
  e.ic1.resize(n);
  e.ic0.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double qobs = A[i] == 1.0 ? qbar1[i] : qbar0[i];
    double resid = span * (ystar[i] - qobs);
    e.ic1[i] = A[i] / p1 * resid + span * qbar1[i] + e.bounds.lo - e.psi1;
    e.ic0[i] =
        (1.0 - A[i]) / (1.0 - p1) * resid + span * qbar0[i] + e.bounds.lo - e.psi0;
  }
  e.warnings = q_fit.warnings;
  e.q_sl = summarize_sl(q_fit);
  finish_inference(e);
  return e;
}

EffectEstimate unadjusted_estimate(const VectorXd& A, const VectorXd& Y) {
  check_design(A, Y);
  const Eigen::Index n = A.size();

  EffectEstimate e;
  e.estimator = "unadjusted";
  e.bounds = bound_outcome(Y);

  double p1 = A.mean();
  double s1 = 0.0, s0 = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) (A[i] == 1.0 ? s1 : s0) += Y[i];
  e.psi1 = s1 / (p1 * static_cast<double>(n));
  e.psi0 = s0 / ((1.0 - p1) * static_cast<double>(n));

  e.ic1.resize(n);
  e.ic0.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    e.ic1[i] = A[i] / p1 * (Y[i] - e.psi1);
    e.ic0[i] = (1.0 - A[i]) / (1.0 - p1) * (Y[i] - e.psi0);
  }
  finish_inference(e);
  return e;
}

SixNumber propensity_summary(const VectorXd& g1) {
  std::vector<double> v(g1.data(), g1.data() + g1.size());
  return six_number(v);
}

SlSummary summarize_sl(const SuperLearnerFit& fit) {
  SlSummary s;
  s.learners.reserve(fit.kept.size());
  for (const auto& spec : fit.kept) s.learners.push_back(spec.name());
  s.weights = fit.weights;
  s.cv_risk = fit.cv_risk_single;
  s.cv_risk_combined = fit.cv_risk_combined;
  return s;
}

}  // namespace maskrr
