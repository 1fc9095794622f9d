#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "fedsandbox/dp_mech.hpp"
#include "fedsandbox/error.hpp"
#include "fedsandbox/stats_math.hpp"

using namespace fedsandbox;

namespace {

// One-sample Kolmogorov-Smirnov p-value against a target CDF.
double ks_one_sample(std::vector<double> x,
                     const std::function<double(double)>& cdf) {
  std::sort(x.begin(), x.end());
  const double n = double(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max(d, std::abs(f - double(i) / n));
    d = std::max(d, std::abs(double(i + 1) / n - f));
  }
  const double lambda = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0, sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    p += sign * std::exp(-2.0 * k * k * lambda * lambda);
    sign = -sign;
  }
  return std::clamp(2.0 * p, 0.0, 1.0);
}

}  // namespace

TEST_CASE("laplace mechanism basics") {
  Rng rng(1);
  const PrivacyParams zero_sens{1.0, 0.0, 0.0};
  CHECK(laplace_mechanism(3.25, zero_sens, rng) == 3.25);

  const PrivacyParams bad{0.0, 0.0, 1.0};
  CHECK_THROWS_AS(laplace_mechanism(0.0, bad, rng), ParameterError);

  // effectively-infinite epsilon leaves the value untouched
  const PrivacyParams huge{1e6, 0.0, 1.0};
  for (int i = 0; i < 100; ++i)
    CHECK(std::abs(laplace_mechanism(1.0, huge, rng) - 1.0) < 1e-3);
}

TEST_CASE("laplace monte-carlo variance matches 2 (sens/eps)^2") {
  Rng rng(2);
  const PrivacyParams p{1.0, 0.0, 1.0};
  const int n = 1000000;
  double sum = 0, sumsq = 0;
  for (int i = 0; i < n; ++i) {
    const double v = laplace_mechanism(0.0, p, rng);
    sum += v;
    sumsq += v * v;
  }
  const double var = sumsq / n - (sum / n) * (sum / n);
  CHECK(var == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("gaussian sigma: classic value, linearity, junction monotonicity") {
  CHECK(gaussian_sigma({1.0, 1e-5, 1.0}) ==
        doctest::Approx(std::sqrt(2.0 * std::log(1.25e5))).epsilon(1e-12));
  CHECK(gaussian_sigma({1.0, 1e-5, 1.0}) == doctest::Approx(4.84).epsilon(2e-3));
  CHECK(gaussian_sigma({0.5, 1e-5, 2.0}) ==
        doctest::Approx(2.0 * gaussian_sigma({0.5, 1e-5, 1.0})).epsilon(1e-12));
  CHECK_THROWS_AS(gaussian_sigma({1.0, 0.0, 1.0}), ParameterError);

  double prev = std::numeric_limits<double>::infinity();
  for (double eps = 0.01; eps < 101.0; eps *= 1.2) {
    const double s = gaussian_sigma({eps, 1e-5, 1.0});
    CHECK(s < prev);
    prev = s;
  }
}

TEST_CASE("analytic gaussian calibration is tight against the exact condition") {
  for (const double eps : {1.5, 3.0, 10.0, 25.0, 100.0}) {
    const double sigma = gaussian_sigma({eps, 1e-6, 2.0});
    CHECK(analytic_gaussian_delta(eps, 2.0, sigma) <= 1e-6 * (1 + 1e-6));
    CHECK(analytic_gaussian_delta(eps, 2.0, sigma * 0.995) > 1e-6);
  }
}

TEST_CASE("gaussian mechanism: reproducibility and monte-carlo std") {
  {
    Rng a(77), b(77);
    const PrivacyParams p{0.7, 1e-5, 1.3};
    CHECK(gaussian_mechanism(2.0, p, a) == gaussian_mechanism(2.0, p, b));
  }
  {
    Rng rng(78);
    const PrivacyParams p{1.0, 1e-5, 1.0};
    const double sigma = gaussian_sigma(p);
    const int n = 1000000;
    double sum = 0, sumsq = 0;
    for (int i = 0; i < n; ++i) {
      const double v = gaussian_mechanism(0.0, p, rng);
      sum += v;
      sumsq += v * v;
    }
    const double sd = std::sqrt(sumsq / n - (sum / n) * (sum / n));
    CHECK(sd == doctest::Approx(sigma).epsilon(0.01));
  }
  {
    Rng rng(79);
    const PrivacyParams zero_sens{1.0, 1e-5, 0.0};
    CHECK(gaussian_mechanism(5.5, zero_sens, rng) == 5.5);
  }
}

TEST_CASE("lognormal variance release: identity, positivity, unbiasedness") {
  Rng rng(3);
  CHECK_THROWS_AS(lognormal_variance(0.0, {1.0, 1e-5, 1.0}, rng), Error);
  CHECK(lognormal_variance(2.5, {1.0, 1e-5, 0.0}, rng) == 2.5);

  // pick sensitivities so the log-noise scale hits the requested values
  const double unit = gaussian_sigma({1.0, 1e-5, 1.0});
  for (const double sigma : {0.1, 0.5, 1.0}) {
    const PrivacyParams p{1.0, 1e-5, sigma / unit};
    Rng mc(1000 + int(sigma * 10));
    const int n = 200000;
    double sum = 0;
    for (int i = 0; i < n; ++i) {
      const double v = lognormal_variance(1.0, p, mc);
      CHECK(v > 0.0);
      sum += v;
    }
    // E[v exp(N(-s^2/2, s^2))] = v; standard error of the mean is
    // sqrt((e^{s^2}-1)/n)
    const double se = std::sqrt((std::exp(sigma * sigma) - 1.0) / n);
    CHECK(sum / n == doctest::Approx(1.0).epsilon(3 * se + 1e-3));
  }
}

TEST_CASE("mean sensitivity formula") {
  CHECK(mean_sensitivity(0, 1, 100) == doctest::Approx(0.01));
  CHECK(mean_sensitivity(71, 202, 303) == doctest::Approx(131.0 / 303.0));
  CHECK(mean_sensitivity(0, 1, 50) ==
        doctest::Approx(2.0 * mean_sensitivity(0, 1, 100)));
  CHECK_THROWS_AS(mean_sensitivity(0, 1, 0), Error);
}

TEST_CASE("log-variance sensitivity: bound values and scaling") {
  const double s = logvar_sensitivity(0, 1, 100, 0.01);
  CHECK(s <= 1.0);
  CHECK(s == doctest::Approx(0.99));  // (n-1)/n^2 / v_floor
  CHECK(logvar_sensitivity(0, 1, 100, 0.02) == doctest::Approx(s / 2));
  CHECK_THROWS_AS(logvar_sensitivity(0, 1, 1, 0.01), Error);
}

TEST_CASE("log-variance sensitivity: exhaustive replace-one oracle, n=3") {
  // every 3-element dataset on an 11-point grid in [0,1], every replace-one
  // neighbour: |log(max(v,f)) - log(max(v',f))| never exceeds the bound
  const double f = 0.05;
  const long long n = 3;
  const double bound = logvar_sensitivity(0, 1, n, f);
  const auto var3 = [](double a, double b, double c) {
    const double m = (a + b + c) / 3.0;
    return ((a - m) * (a - m) + (b - m) * (b - m) + (c - m) * (c - m)) / 3.0;
  };
  double worst = 0.0;
  for (int i = 0; i <= 10; ++i)
    for (int j = 0; j <= 10; ++j)
      for (int k = 0; k <= 10; ++k) {
        double x[3] = {i / 10.0, j / 10.0, k / 10.0};
        const double v = std::max(var3(x[0], x[1], x[2]), f);
        for (int pos = 0; pos < 3; ++pos)
          for (int r = 0; r <= 10; ++r) {
            double y[3] = {x[0], x[1], x[2]};
            y[pos] = r / 10.0;
            const double v2 = std::max(var3(y[0], y[1], y[2]), f);
            worst = std::max(worst, std::abs(std::log(v) - std::log(v2)));
          }
      }
  CHECK(worst <= bound * (1 + 1e-12));
  // the bound is not absurdly loose on this domain either
  CHECK(worst > 0.25 * bound);
}

TEST_CASE("laplace and gaussian streams pass a KS test at alpha 0.01") {
  const int n = 100000;
  {
    Rng rng(41);
    const PrivacyParams p{2.0, 0.0, 3.0};
    const double b = p.sensitivity / p.epsilon;
    std::vector<double> xs(n);
    for (auto& x : xs) x = laplace_mechanism(0.0, p, rng);
    const double pv = ks_one_sample(xs, [b](double x) {
      return x < 0 ? 0.5 * std::exp(x / b) : 1.0 - 0.5 * std::exp(-x / b);
    });
    CHECK(pv > 0.01);
  }
  {
    Rng rng(42);
    const PrivacyParams p{1.0, 1e-5, 1.0};
    const double sigma = gaussian_sigma(p);
    std::vector<double> xs(n);
    for (auto& x : xs) x = gaussian_mechanism(0.0, p, rng);
    const double pv =
        ks_one_sample(xs, [sigma](double x) { return normal_cdf(x / sigma); });
    CHECK(pv > 0.01);
  }
}

TEST_CASE("dp smoke test: adjacent datasets satisfy the epsilon ratio bound") {
  // mean release over 5 bounded rows, replace-one neighbours
  const double d1[5] = {0.1, 0.3, 0.5, 0.7, 0.9};
  const double d2[5] = {0.1, 0.3, 0.5, 0.7, 0.1};
  const auto mean = [](const double* d) {
    double s = 0;
    for (int i = 0; i < 5; ++i) s += d[i];
    return s / 5.0;
  };
  const PrivacyParams p{1.0, 0.0, mean_sensitivity(0, 1, 5)};
  const int n = 300000;
  const int bins = 24;
  const double lo = -0.6, hi = 1.6;
  std::vector<double> h1(bins, 0), h2(bins, 0);
  Rng r1(5001), r2(5002);
  for (int i = 0; i < n; ++i) {
    const double v1 = laplace_mechanism(mean(d1), p, r1);
    const double v2 = laplace_mechanism(mean(d2), p, r2);
    const int b1 = std::clamp(int((v1 - lo) / (hi - lo) * bins), 0, bins - 1);
    const int b2 = std::clamp(int((v2 - lo) / (hi - lo) * bins), 0, bins - 1);
    h1[std::size_t(b1)] += 1;
    h2[std::size_t(b2)] += 1;
  }
  const double bound = std::exp(p.epsilon);
  for (int b = 0; b < bins; ++b) {
    if (h1[std::size_t(b)] < 400 || h2[std::size_t(b)] < 400) continue;
    const double ratio = h1[std::size_t(b)] / h2[std::size_t(b)];
    CHECK(ratio < bound * 1.25);
    CHECK(1.0 / ratio < bound * 1.25);
  }
}
