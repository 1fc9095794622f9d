#include "fedsandbox/fed_learn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "fedsandbox/error.hpp"
#include "fedsandbox/rdp.hpp"

namespace fedsandbox {

namespace {

constexpr std::uint64_t kPoissonTag = 0xBA7C4;
constexpr std::uint64_t kNoiseTag = 0x1015E;
constexpr std::uint64_t kInitTag = 0x1117;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double dot(std::span<const double> w, const double* x) {
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * x[i];
  return s;
}

// Accumulates the norm-clipped per-example gradients of one node's Poisson
// batch into sum (size dim+1). Returns the realized batch size.
std::size_t accumulate_batch(const EncodedMatrix& data,
                             std::span<const std::uint32_t> rows,
                             const Model& m,
                             std::span<const double> row_sq_norm, double q,
                             double clip_norm, std::uint64_t seed,
                             long long step, std::vector<double>& sum) {
  const std::size_t dim = data.dim;
  std::size_t batch = 0;
  for (const auto row : rows) {
    if (unit_from_hash(derive_seed(seed, kPoissonTag, std::uint64_t(step),
                                   row)) >= q)
      continue;
    ++batch;
    const double* x = data.row(row);
    const double z = dot(std::span(m.weights), x) + m.bias;
    if (!std::isfinite(z)) throw Error("train: non-finite score");
    const double err = sigmoid(z) - double(data.y[row]);
    double scale = err;
    const double norm = std::abs(err) * std::sqrt(row_sq_norm[row] + 1.0);
    if (norm > clip_norm) scale = err * clip_norm / norm;
    for (std::size_t j = 0; j < dim; ++j) sum[j] += scale * x[j];
    sum[dim] += scale;
  }
  return batch;
}

void apply_update(Model& m, std::span<const double> sum, double denom,
                  double lr) {
  const std::size_t dim = m.weights.size();
  for (std::size_t j = 0; j < dim; ++j) m.weights[j] -= lr * sum[j] / denom;
  m.bias -= lr * sum[dim] / denom;
}

std::vector<double> square_norms(const EncodedMatrix& data) {
  std::vector<double> out(data.rows);
  for (std::size_t r = 0; r < data.rows; ++r) {
    const double* x = data.row(r);
    double s = 0.0;
    for (std::size_t j = 0; j < data.dim; ++j) s += x[j] * x[j];
    out[r] = s;
  }
  return out;
}

// Small seeded random start: breaks the exact symmetry of the zero model so
// repeated runs with different seeds explore genuinely different
// trajectories (the non-private baseline needs trial-to-trial variance for
// the critical-epsilon tests to be well posed).
Model init_model(std::size_t dim, std::uint64_t seed) {
  Model m;
  m.weights.resize(dim);
  Rng rng(derive_seed(seed, kInitTag));
  for (auto& w : m.weights) w = 0.05 * rng.normal();
  return m;
}

long long steps_for(std::size_t rows, int max_batch, int epochs) {
  const long long per_epoch =
      (static_cast<long long>(rows) + max_batch - 1) / std::max(1, max_batch);
  return std::max<long long>(1, per_epoch) * epochs;
}

}  // namespace

std::vector<double> grad_logloss(const Model& m, std::span<const double> x,
                                 int y) {
  if (x.size() != m.weights.size())
    throw ConfigError("grad_logloss: dimension mismatch");
  for (const double v : x)
    if (!std::isfinite(v)) throw Error("grad_logloss: non-finite input");
  const double z = dot(std::span(m.weights), x.data()) + m.bias;
  if (!std::isfinite(z)) throw Error("grad_logloss: non-finite score");
  const double err = sigmoid(z) - double(y);
  std::vector<double> g(x.size() + 1);
  for (std::size_t j = 0; j < x.size(); ++j) g[j] = err * x[j];
  g[x.size()] = err;
  return g;
}

TrainResult train(const EncodedMatrix& data, const TrainConfig& cfg,
                  std::uint64_t seed) {
  if (data.rows == 0) throw ConfigError("train: empty dataset");
  TrainResult out;
  out.steps = steps_for(data.rows, cfg.max_batch, cfg.epochs);
  out.q = std::min(1.0, double(cfg.max_batch) / double(data.rows));
  if (cfg.dp) {
    if (cfg.sigma_override > 0)
      out.sigma = cfg.sigma_override;
    else if (cfg.sigma_override < 0)
      out.sigma = 0.0;  // explicit no-noise run (still clipped)
    else
      out.sigma = calibrate_sigma(cfg.target_eps, cfg.delta, out.q, out.steps);
    out.achieved_eps =
        out.sigma > 0
            ? to_eps_delta(compose(rdp_curve(out.q, out.sigma), out.steps),
                           cfg.delta)
            : std::numeric_limits<double>::infinity();
  } else {
    out.achieved_eps = std::numeric_limits<double>::infinity();
  }

  const auto row_sq = square_norms(data);
  std::vector<std::uint32_t> rows(data.rows);
  for (std::size_t r = 0; r < data.rows; ++r) rows[r] = std::uint32_t(r);

  Model m = init_model(data.dim, seed);
  std::vector<double> sum(data.dim + 1);
  const double expected_batch = out.q * double(data.rows);
  for (long long step = 0; step < out.steps; ++step) {
    std::fill(sum.begin(), sum.end(), 0.0);
    accumulate_batch(data, rows, m, row_sq, out.q, cfg.clip_norm, seed, step,
                     sum);
    if (cfg.dp && out.sigma > 0) {
      Rng noise(derive_seed(seed, kNoiseTag, std::uint64_t(step)));
      const double s = out.sigma * cfg.clip_norm;
      for (auto& v : sum) v += s * noise.normal();
    }
    apply_update(m, sum, expected_batch, cfg.lr);
  }
  out.model = std::move(m);
  return out;
}

TrainResult train_federated(
    const EncodedMatrix& data,
    const std::vector<std::vector<std::uint32_t>>& node_rows,
    const TrainConfig& cfg, std::uint64_t seed) {
  const int k = int(node_rows.size());
  if (k < 1) throw ConfigError("train_federated: need at least one node");
  if (k == 1 || (!cfg.dp && !cfg.plain_secure)) {
    // Single node or non-private reference: identical to central.
    return train(data, cfg, seed);
  }
  std::size_t total = 0;
  for (const auto& rows : node_rows) total += rows.size();
  if (total != data.rows)
    throw ConfigError("train_federated: partition does not cover the data");

  TrainResult out;
  out.steps = steps_for(total, cfg.max_batch, cfg.epochs);
  out.q = std::min(1.0, double(cfg.max_batch) / double(total));

  // Noise plan per scenario.
  std::vector<double> node_sigma(std::size_t(k), 0.0);
  if (!cfg.dp) {
    out.achieved_eps = std::numeric_limits<double>::infinity();
  } else if (cfg.scenario == Scenario::secure) {
    // Split one central-calibrated Gaussian across nodes: K draws of
    // N(0, sigma^2 C^2 / K) sum to the central N(0, sigma^2 C^2).
    double sigma;
    if (cfg.sigma_override > 0)
      sigma = cfg.sigma_override;
    else if (cfg.sigma_override < 0)
      sigma = 0.0;
    else
      sigma = calibrate_sigma(cfg.target_eps, cfg.delta, out.q, out.steps);
    out.sigma = sigma;
    std::fill(node_sigma.begin(), node_sigma.end(),
              sigma / std::sqrt(double(k)));
    out.achieved_eps =
        sigma > 0
            ? to_eps_delta(compose(rdp_curve(out.q, sigma), out.steps),
                           cfg.delta)
            : std::numeric_limits<double>::infinity();
  } else if (cfg.scenario == Scenario::local) {
    // Every node protects its own shard with the full budget, calibrated to
    // its own sampling rate.
    out.achieved_eps = 0.0;
    for (int node = 0; node < k; ++node) {
      const std::size_t n_local = node_rows[std::size_t(node)].size();
      if (n_local == 0) continue;
      const double q_local =
          std::min(1.0, double(cfg.max_batch) / double(k) / double(n_local));
      if (q_local * double(n_local) < 1.0) ++out.small_shard_warnings;
      const double sigma =
          calibrate_sigma(cfg.target_eps, cfg.delta, q_local, out.steps);
      node_sigma[std::size_t(node)] = sigma;
      out.sigma = std::max(out.sigma, sigma);
      out.achieved_eps = std::max(
          out.achieved_eps,
          to_eps_delta(compose(rdp_curve(q_local, sigma), out.steps),
                       cfg.delta));
    }
  } else {
    throw ConfigError("train_federated: scenario must be local or secure");
  }

  const bool use_secure =
      cfg.scenario == Scenario::secure || cfg.plain_secure;
  const auto row_sq = square_norms(data);
  FixedPointCodec codec;
  codec.fractional_bits = cfg.fractional_bits;
  codec.clip = cfg.secure_clip;
  if (use_secure) codec.check_headroom(k);

  Model m = init_model(data.dim, seed);
  const double expected_batch = out.q * double(total);
  std::vector<double> node_sum(data.dim + 1);
  std::vector<double> global_sum(data.dim + 1);
  for (long long step = 0; step < out.steps; ++step) {
    std::fill(global_sum.begin(), global_sum.end(), 0.0);
    std::vector<MaskedVector> shares;
    PairwiseSeeds seeds;
    if (use_secure) {
      shares.reserve(std::size_t(k));
      seeds = PairwiseSeeds::derive(cfg.secure_root_secret, k,
                                    std::uint64_t(step));
    }
    for (int node = 0; node < k; ++node) {
      std::fill(node_sum.begin(), node_sum.end(), 0.0);
      accumulate_batch(data, node_rows[std::size_t(node)], m, row_sq, out.q,
                       cfg.clip_norm, seed, step, node_sum);
      Rng noise(derive_seed(seed, kNoiseTag, std::uint64_t(step),
                            std::uint64_t(node)));
      const double s = node_sigma[std::size_t(node)] * cfg.clip_norm;
      if (s > 0)
        for (auto& v : node_sum) v += s * noise.normal();
      if (use_secure) {
        const auto encoded = codec.encode(node_sum, &out.clip_events);
        shares.push_back(mask(encoded, node, seeds));
      } else {
        for (std::size_t j = 0; j < node_sum.size(); ++j)
          global_sum[j] += node_sum[j];
      }
    }
    if (use_secure) {
      const auto decoded = aggregate(shares, k, codec);
      std::copy(decoded.begin(), decoded.end(), global_sum.begin());
    }
    apply_update(m, global_sum, expected_batch, cfg.lr);
  }
  out.model = std::move(m);
  return out;
}

double evaluate(const Model& m, const EncodedMatrix& test) {
  if (test.dim != m.weights.size())
    throw ConfigError("evaluate: dimension mismatch");
  if (test.rows == 0) return 0.0;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < test.rows; ++r) {
    const double z = dot(std::span(m.weights), test.row(r)) + m.bias;
    const int pred = z >= 0.0 ? 1 : 0;
    if (pred == test.y[r]) ++correct;
  }
  return double(correct) / double(test.rows);
}

void export_model(const Model& m, const std::vector<std::string>& names,
                  const std::string& path) {
  if (names.size() != m.weights.size())
    throw ConfigError("export_model: name/weight count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file " + path);
  for (std::size_t j = 0; j < names.size(); ++j)
    out << names[j] << ' ' << m.weights[j] << '\n';
  out << "(bias) " << m.bias << '\n';
}

std::vector<std::vector<std::uint32_t>> partition_rows(std::size_t rows, int k,
                                                       std::uint64_t seed) {
  if (k < 1 || std::size_t(k) > rows)
    throw ConfigError("partition_rows: need 1 <= k <= rows");
  std::vector<std::uint32_t> ids(rows);
  for (std::size_t i = 0; i < rows; ++i) ids[i] = std::uint32_t(i);
  Rng rng(derive_seed(seed, 0x9A671710ull));
  shuffle(ids, rng);
  std::vector<std::vector<std::uint32_t>> out(static_cast<std::size_t>(k));
  const std::size_t base = rows / std::size_t(k);
  const std::size_t extra = rows % std::size_t(k);
  std::size_t pos = 0;
  for (int node = 0; node < k; ++node) {
    const std::size_t len = base + (std::size_t(node) < extra ? 1 : 0);
    out[std::size_t(node)].assign(ids.begin() + pos, ids.begin() + pos + len);
    pos += len;
  }
  return out;
}

}  // namespace fedsandbox
