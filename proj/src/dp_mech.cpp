#include "fedsandbox/dp_mech.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedsandbox/error.hpp"
#include "fedsandbox/stats_math.hpp"

namespace fedsandbox {

double laplace_mechanism(double x, const PrivacyParams& p, Rng& rng) {
  if (!(p.epsilon > 0)) throw ParameterError("laplace: epsilon must be positive");
  if (p.sensitivity < 0) throw ParameterError("laplace: negative sensitivity");
  if (p.sensitivity == 0) return x;
  return x + rng.laplace(p.sensitivity / p.epsilon);
}

namespace {

// log Phi(x), stable far into the lower tail where Phi underflows.
double log_normal_cdf(double x) {
  if (x > -8.0) return std::log(normal_cdf(x));
  const double x2 = x * x;
  return -0.5 * x2 - std::log(-x) - 0.918938533204672742 +
         std::log1p(-1.0 / x2 + 3.0 / (x2 * x2));
}

}  // namespace

double analytic_gaussian_delta(double epsilon, double sensitivity,
                               double sigma) {
  const double a = sensitivity / (2.0 * sigma);
  const double b = epsilon * sigma / sensitivity;
  if (std::isnan(b)) return 0.0;
  // exp(epsilon) alone overflows for large epsilon; keep the product in log
  // space
  const double log_second = epsilon + log_normal_cdf(-a - b);
  const double second = log_second > 700.0
                            ? std::numeric_limits<double>::infinity()
                            : std::exp(log_second);
  return normal_cdf(a - b) - second;
}

double gaussian_sigma(const PrivacyParams& p) {
  if (!(p.epsilon > 0)) throw ParameterError("gaussian: epsilon must be positive");
  if (!(p.delta > 0) || p.delta >= 1)
    throw ParameterError("gaussian: delta must be in (0,1)");
  if (p.sensitivity < 0) throw ParameterError("gaussian: negative sensitivity");
  if (p.sensitivity == 0) return 0.0;
  if (p.epsilon <= 1.0)
    return p.sensitivity * std::sqrt(2.0 * std::log(1.25 / p.delta)) / p.epsilon;

  // Analytic calibration: the exact delta condition is monotone decreasing
  // in sigma; bracket then bisect.
  double hi = p.sensitivity;
  while (analytic_gaussian_delta(p.epsilon, p.sensitivity, hi) > p.delta)
    hi *= 2.0;
  double lo = hi;
  while (lo > 1e-12 * p.sensitivity &&
         analytic_gaussian_delta(p.epsilon, p.sensitivity, lo * 0.5) <= p.delta)
    lo *= 0.5;
  lo *= 0.5;
  for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (analytic_gaussian_delta(p.epsilon, p.sensitivity, mid) > p.delta)
      lo = mid;
    else
      hi = mid;
  }
  return hi;
}

double gaussian_mechanism(double x, const PrivacyParams& p, Rng& rng) {
  const double sigma = gaussian_sigma(p);
  if (sigma == 0.0) return x;
  return x + sigma * rng.normal();
}

double lognormal_variance(double v, const PrivacyParams& p, Rng& rng) {
  if (!(v > 0)) throw Error("lognormal_variance: input must be positive");
  const double sigma = gaussian_sigma(p);
  if (sigma == 0.0) return v;
  const double g = -0.5 * sigma * sigma + sigma * rng.normal();
  // exp underflows for extreme noise scales; keep the release positive
  return std::max(v * std::exp(g), std::numeric_limits<double>::min());
}

double mean_sensitivity(double lo, double hi, long long n) {
  if (n < 1) throw Error("mean_sensitivity: need n >= 1");
  if (!(lo < hi)) throw Error("mean_sensitivity: need lo < hi");
  return (hi - lo) / double(n);
}

double variance_sensitivity(double lo, double hi, long long n) {
  if (n < 2) throw Error("variance_sensitivity: need n >= 2");
  if (!(lo < hi)) throw Error("variance_sensitivity: need lo < hi");
  const double r = hi - lo;
  return double(n - 1) / (double(n) * double(n)) * r * r;
}

double logvar_sensitivity(double lo, double hi, long long n, double v_floor) {
  if (n < 2) throw Error("logvar_sensitivity: need n >= 2");
  if (!(v_floor > 0)) throw Error("logvar_sensitivity: v_floor must be positive");
  const double r = hi - lo;
  const double coarse = r * r / double(n);
  return std::min(coarse, variance_sensitivity(lo, hi, n)) / v_floor;
}

}  // namespace fedsandbox
