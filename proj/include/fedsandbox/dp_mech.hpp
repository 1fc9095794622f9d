#pragma once

#include "fedsandbox/rng.hpp"

namespace fedsandbox {

// (epsilon, delta, sensitivity) triple parameterizing one noise release.
// delta = 0 is only meaningful for the Laplace mechanism.
struct PrivacyParams {
  double epsilon = 1.0;
  double delta = 0.0;
  double sensitivity = 1.0;
};

// x + Laplace(sensitivity / epsilon).
double laplace_mechanism(double x, const PrivacyParams& p, Rng& rng);

// Exact delta achieved by a Gaussian mechanism with the given noise scale
// (Balle & Wang analytic form). Used by the calibration search and by the
// unit tests as the independent condition check.
double analytic_gaussian_delta(double epsilon, double sensitivity,
                               double sigma);

// Noise scale for an (epsilon, delta) Gaussian release. Classic
// sqrt(2 ln(1.25/delta)) calibration for epsilon <= 1, analytic calibration
// (binary search on the exact condition) above 1 where the classic formula
// is invalid.
double gaussian_sigma(const PrivacyParams& p);

// x + N(0, gaussian_sigma(p)^2).
double gaussian_mechanism(double x, const PrivacyParams& p, Rng& rng);

// Multiplicative release of a positive quantity: v * exp(g) with
// g ~ N(-sigma^2/2, sigma^2). The mean-correction keeps E[release] = v and
// the output strictly positive. p.sensitivity must be the sensitivity of
// log(v).
double lognormal_variance(double v, const PrivacyParams& p, Rng& rng);

// Replace-one sensitivity of a bounded mean.
double mean_sensitivity(double lo, double hi, long long n);

// Replace-one sensitivity of the log of a variance-like quantity clamped
// below at v_floor. The population variance of n points in [lo, hi] moves
// by at most (n-1)/n^2 * (hi-lo)^2 under replace-one; dividing by the floor
// bounds the log difference.
double logvar_sensitivity(double lo, double hi, long long n, double v_floor);

// Exact replace-one bound for the population variance itself.
double variance_sensitivity(double lo, double hi, long long n);

}  // namespace fedsandbox
