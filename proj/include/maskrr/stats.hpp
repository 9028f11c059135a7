#pragma once

#include <vector>

namespace maskrr {

// ---- moments ----

double mean(const std::vector<double>& x);
double sample_sd(const std::vector<double>& x);  // n-1 denominator

// ---- quantiles ----

// Linear-interpolation quantile (type 7): position p*(n-1) on the sorted
// sample.  p must be in [0,1].
double quantile_type7(std::vector<double> x, double p);

struct SixNumber {
  double min, q1, median, mean, q3, max;
};

SixNumber six_number(const std::vector<double>& x);

// ---- special functions ----

// Regularized incomplete beta I_x(a,b) via Lentz continued fraction.
double incomplete_beta(double a, double b, double x);

// Student-t CDF with nu degrees of freedom.
double student_t_cdf(double t, double nu);

// Standard normal CDF and inverse CDF (Acklam's rational approximation,
// |relative error| < 1.2e-9).
double normal_cdf(double x);
double normal_inv_cdf(double p);

// ---- correlation screening support ----

double pearson_r(const std::vector<double>& x, const std::vector<double>& y);

// Two-sided p-value for the null of zero correlation given sample
// correlation r and sample size n (t-test with n-2 degrees of freedom).
double pearson_pvalue(double r, int n);

}  // namespace maskrr
