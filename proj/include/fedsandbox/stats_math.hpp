#pragma once

#include <vector>

namespace fedsandbox {

double log_beta(double a, double b);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta_reg(double x, double a, double b);

double normal_cdf(double x);
double normal_quantile(double p);

double student_t_cdf(double t, double df);
double student_t_quantile(double p, double df);
// Two-sided critical value: |t| above this rejects at level alpha.
double student_t_critical(double df, double alpha);

// Upper critical value of the chi-square distribution (Wilson-Hilferty).
double chi_square_critical(double df, double alpha);

struct KsResult {
  double statistic = 0;
  double p_value = 1;
};

// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

// Type-7 empirical quantile of an ascending-sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double p);

struct WelchTest {
  double t = 0;
  double df = 0;
  double p_value = 1;
};

// Welch two-sample test from summary moments (sample variances).
WelchTest welch_from_moments(double mean1, double var1, double n1,
                             double mean2, double var2, double n2);

}  // namespace fedsandbox
