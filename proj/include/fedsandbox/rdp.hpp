#pragma once

#include <span>
#include <vector>

namespace fedsandbox {

// Renyi-DP curve of the (composed) Poisson-subsampled Gaussian mechanism.
struct RdpCurve {
  std::vector<int> orders;    // integer alpha > 1
  std::vector<double> values; // RDP epsilon at each order
  long long steps = 1;
  double q = 1.0;
  double sigma = 1.0;
};

// Integer orders 2..64 plus 128 and 256: dense where the conversion optimum
// sits for small epsilon, sparse tail for the low-privacy end of the grid.
std::vector<int> default_rdp_orders();

// RDP of one Poisson-subsampled Gaussian step at integer order alpha.
// Exact alpha/(2 sigma^2) when q = 1; the stable binomial-series bound
// otherwise.
double rdp_subsampled_gaussian(double q, double sigma, int alpha);

RdpCurve rdp_curve(double q, double sigma,
                   std::span<const int> orders = {});

// RDP composes additively across steps.
RdpCurve compose(const RdpCurve& curve, long long steps);

// Standard conversion: eps = min_alpha [ eps(alpha) + log(1/delta)/(alpha-1) ].
double to_eps_delta(const RdpCurve& curve, double delta);

// Smallest noise multiplier (relative tolerance 1e-3) whose composed,
// converted epsilon stays at or below the target. Search domain
// [0.3, 1e4]; an unreachable target throws CalibrationError.
double calibrate_sigma(double target_eps, double delta, double q,
                       long long steps);

}  // namespace fedsandbox
