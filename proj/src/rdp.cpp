#include "fedsandbox/rdp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fedsandbox/error.hpp"

namespace fedsandbox {

std::vector<int> default_rdp_orders() {
  std::vector<int> orders;
  for (int a = 2; a <= 64; ++a) orders.push_back(a);
  orders.push_back(128);
  orders.push_back(256);
  return orders;
}

namespace {

double log_binomial(int n, int k) {
  return std::lgamma(double(n) + 1.0) - std::lgamma(double(k) + 1.0) -
         std::lgamma(double(n - k) + 1.0);
}

double log_sum_exp(const std::vector<double>& v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (const double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

double rdp_subsampled_gaussian(double q, double sigma, int alpha) {
  if (!(q > 0.0) || q > 1.0)
    throw ParameterError("rdp: sampling rate must be in (0,1]");
  if (!(sigma > 0.0)) throw ParameterError("rdp: sigma must be positive");
  if (alpha < 2) throw ParameterError("rdp: integer order must be >= 2");
  if (q == 1.0) return double(alpha) / (2.0 * sigma * sigma);

  // log A_alpha = logsumexp_k [ log C(alpha,k) + k log q
  //               + (alpha-k) log(1-q) + (k^2-k)/(2 sigma^2) ]
  const double log_q = std::log(q);
  const double log_1q = std::log1p(-q);
  std::vector<double> terms;
  terms.reserve(std::size_t(alpha) + 1);
  for (int k = 0; k <= alpha; ++k) {
    terms.push_back(log_binomial(alpha, k) + k * log_q +
                    (alpha - k) * log_1q +
                    double(k) * double(k - 1) / (2.0 * sigma * sigma));
  }
  const double log_a = log_sum_exp(terms);
  return std::max(0.0, log_a / (double(alpha) - 1.0));
}

RdpCurve rdp_curve(double q, double sigma, std::span<const int> orders) {
  RdpCurve curve;
  curve.orders = orders.empty()
                     ? default_rdp_orders()
                     : std::vector<int>(orders.begin(), orders.end());
  curve.q = q;
  curve.sigma = sigma;
  curve.steps = 1;
  curve.values.reserve(curve.orders.size());
  for (const int a : curve.orders)
    curve.values.push_back(rdp_subsampled_gaussian(q, sigma, a));
  return curve;
}

RdpCurve compose(const RdpCurve& curve, long long steps) {
  if (steps < 0) throw ParameterError("compose: steps must be >= 0");
  RdpCurve out = curve;
  out.steps = steps;
  for (auto& v : out.values) v *= double(steps);
  return out;
}

double to_eps_delta(const RdpCurve& curve, double delta) {
  if (curve.orders.empty()) throw Error("to_eps_delta: empty curve");
  if (!(delta > 0.0 && delta < 1.0))
    throw ParameterError("to_eps_delta: delta must be in (0,1)");
  double best = std::numeric_limits<double>::infinity();
  const double log_inv_delta = std::log(1.0 / delta);
  for (std::size_t i = 0; i < curve.orders.size(); ++i) {
    const double eps =
        curve.values[i] + log_inv_delta / (double(curve.orders[i]) - 1.0);
    best = std::min(best, eps);
  }
  return best;
}

double calibrate_sigma(double target_eps, double delta, double q,
                       long long steps) {
  if (!(target_eps > 0.0))
    throw ParameterError("calibrate_sigma: target epsilon must be positive");
  if (steps < 1) throw ParameterError("calibrate_sigma: steps must be >= 1");
  const auto orders = default_rdp_orders();
  const auto eps_at = [&](double sigma) {
    return to_eps_delta(compose(rdp_curve(q, sigma, orders), steps), delta);
  };
  constexpr double kSigmaLo = 0.3, kSigmaHi = 1e4;
  if (eps_at(kSigmaHi) > target_eps)
    throw CalibrationError("calibrate_sigma: target epsilon unreachable with sigma <= 1e4");
  if (eps_at(kSigmaLo) <= target_eps) return kSigmaLo;
  double lo = kSigmaLo, hi = kSigmaHi;  // eps(lo) > target >= eps(hi)
  for (int i = 0; i < 200 && (hi - lo) > 1e-6 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (eps_at(mid) > target_eps ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace fedsandbox
