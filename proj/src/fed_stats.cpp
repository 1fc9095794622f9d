#include "fedsandbox/fed_stats.hpp"

#include <algorithm>
#include <cmath>

#include "fedsandbox/error.hpp"
#include "fedsandbox/stats_math.hpp"

namespace fedsandbox {

const char* scenario_name(Scenario s) {
  switch (s) {
    case Scenario::central: return "central";
    case Scenario::local: return "local";
    case Scenario::secure: return "secure";
  }
  return "?";
}

PartialStat merge(const PartialStat& a, const PartialStat& b) {
  return {a.n + b.n, a.sum + b.sum, a.sumsq + b.sumsq};
}

std::pair<PartialStat, PartialStat> local_partials(const Table& t, int col) {
  if (col < 0 || std::size_t(col) >= t.columns.size() ||
      t.columns[std::size_t(col)].kind != ColumnKind::numeric)
    throw ConfigError("local_partials: column must be numeric");
  PartialStat a, b;
  for (std::size_t r = 0; r < t.rows; ++r) {
    const double v = t(r, std::size_t(col));
    PartialStat& p = t.target_class(r) == 0 ? a : b;
    ++p.n;
    p.sum += v;
    p.sumsq += v * v;
  }
  return {a, b};
}

TTestResult welch_t(const PartialStat& a, const PartialStat& b) {
  if (a.n < 2 || b.n < 2)
    throw DegenerateDataError("welch_t: need at least 2 rows per class");
  const auto w = welch_from_moments(a.mean(), a.var_sample(), double(a.n),
                                    b.mean(), b.var_sample(), double(b.n));
  TTestResult out;
  out.t = w.t;
  out.df = w.df;
  out.mean_a = a.mean();
  out.mean_b = b.mean();
  out.var_a = a.var_sample();
  out.var_b = b.var_sample();
  out.n_a = a.n;
  out.n_b = b.n;
  return out;
}

namespace {

// Affine map of exact partials onto the unit interval so every sensitivity
// below is the z-space one (range 1).
PartialStat to_unit(const PartialStat& p, const ColumnSpec& col) {
  const double r = col.range(), lo = col.lo;
  PartialStat z;
  z.n = p.n;
  z.sum = (p.sum - double(p.n) * lo) / r;
  z.sumsq = (p.sumsq - 2.0 * lo * p.sum + double(p.n) * lo * lo) / (r * r);
  return z;
}

double vfloor_unit(const ColumnSpec& col) {
  return col.variance_floor() / (col.range() * col.range());
}

struct NoisyStat {
  long long n = 0;
  double mean = 0.0;        // z-space
  double mean_sigma = 0.0;  // noise scale that produced `mean`
  double var = 0.0;         // z-space sample variance; valid iff has_var
  bool has_var = false;
};

// Gaussian release of a z-space mean over n rows.
NoisyStat release_mean(const PartialStat& z, double eps, double delta,
                       Rng& rng) {
  NoisyStat out;
  out.n = z.n;
  const PrivacyParams p{eps, delta, mean_sensitivity(0.0, 1.0, z.n)};
  out.mean_sigma = gaussian_sigma(p);
  out.mean = z.mean() + out.mean_sigma * rng.normal();
  return out;
}

// Log-normal release of a z-space population variance over n >= 2 rows,
// returned on the sample-variance convention (public n rescale).
double release_variance(const PartialStat& z, double v_floor, double eps,
                        double delta, Rng& rng) {
  const PrivacyParams p{eps, delta,
                        logvar_sensitivity(0.0, 1.0, z.n, v_floor)};
  const double v_pop = std::max(z.var_pop(), v_floor);
  return lognormal_variance(v_pop, p, rng) * double(z.n) / double(z.n - 1);
}

// Pools per-node noisy statistics into one class-level (mean, sample
// variance): the standard combination of group means and variances weighted
// by the public counts, applied to the noisy releases as-is. Mean noise
// inflates the between-node term, which is part of the local-DP cost the
// experiment measures. A floored total guards the downstream Welch
// denominator (recorded).
NoisyStat pool_nodes(const std::vector<NoisyStat>& nodes, double v_floor,
                     StatsEvents* events) {
  NoisyStat out;
  double n = 0.0;
  for (const auto& s : nodes) n += double(s.n);
  if (n < 2) throw DegenerateDataError("pooling: fewer than 2 rows in a class");
  out.n = (long long)std::llround(n);
  double mean = 0.0;
  for (const auto& s : nodes) mean += double(s.n) * s.mean;
  mean /= n;
  out.mean = mean;
  double ss = 0.0;
  for (const auto& s : nodes) {
    if (s.has_var) ss += (double(s.n) - 1.0) * s.var;
    const double d = s.mean - mean;
    ss += double(s.n) * d * d;
  }
  out.var = ss / (n - 1.0);
  if (out.var < v_floor) {
    out.var = v_floor;
    if (events) ++events->variance_floored;
  }
  out.has_var = true;
  return out;
}

TTestResult assemble(const NoisyStat& a, const NoisyStat& b,
                     const ColumnSpec& col, Scenario sc, double eps) {
  const double r = col.range();
  const auto w = welch_from_moments(a.mean, a.var, double(a.n), b.mean, b.var,
                                    double(b.n));
  TTestResult out;
  out.t = w.t;
  out.df = w.df;
  out.mean_a = col.lo + r * a.mean;
  out.mean_b = col.lo + r * b.mean;
  out.var_a = r * r * a.var;
  out.var_b = r * r * b.var;
  out.n_a = a.n;
  out.n_b = b.n;
  out.scenario = sc;
  out.epsilon = eps;
  return out;
}

// Shared global-release path of scenarios 1 and 3: one Gaussian mean and
// one log-normal variance per class at a quarter of the budget each.
TTestResult release_global(const std::array<PartialStat, 2>& z_class,
                           const ColumnSpec& col, const PrivacyParams& p,
                           Rng& rng, const StatsConfig& cfg, Scenario sc,
                           StatsEvents* events) {
  const double eps = p.epsilon * cfg.budget_fraction;
  const double delta = p.delta * cfg.budget_fraction;
  const double vf = vfloor_unit(col);
  if (z_class[0].var_pop() == 0.0 && z_class[1].var_pop() == 0.0)
    throw DegenerateDataError("t statistic undefined: zero variance in both classes");
  NoisyStat cls[2];
  for (int c = 0; c < 2; ++c) {
    if (z_class[c].n < 2)
      throw DegenerateDataError("global release: class with fewer than 2 rows");
    cls[c] = release_mean(z_class[c], eps, delta, rng);
    cls[c].var = release_variance(z_class[c], vf, eps, delta, rng);
    if (cls[c].var < vf) {
      cls[c].var = vf;
      if (events) ++events->variance_floored;
    }
    cls[c].has_var = true;
  }
  return assemble(cls[0], cls[1], col, sc, p.epsilon);
}

// Direct-Laplace comparison variant: release the clipped exact t itself.
TTestResult release_direct_laplace(const std::array<PartialStat, 2>& z_class,
                                   const ColumnSpec& col,
                                   const PrivacyParams& p, Rng& rng,
                                   const StatsConfig& cfg, Scenario sc) {
  TTestResult exact = welch_t(z_class[0], z_class[1]);
  const double clipped = std::clamp(exact.t, -cfg.t_clip, cfg.t_clip);
  const PrivacyParams rel{p.epsilon, 0.0, 2.0 * cfg.t_clip};
  exact.t = laplace_mechanism(clipped, rel, rng);
  const double r = col.range();
  exact.mean_a = col.lo + r * exact.mean_a;
  exact.mean_b = col.lo + r * exact.mean_b;
  exact.var_a = r * r * exact.var_a;
  exact.var_b = r * r * exact.var_b;
  exact.scenario = sc;
  exact.epsilon = p.epsilon;
  return exact;
}

// Scenario-2 node releases for one class, pooled: every node with rows
// releases its mean; nodes with at least 2 rows release a variance too.
// The local variance floor shrinks with sqrt(n_local / n_class): a small
// shard's class variance legitimately sits below the population floor, and
// clamping it there would bias the pooled estimate even without noise.
NoisyStat class_release_local(const ScenarioPrecomp& pre, int c, double eps,
                              double delta, double vf, Rng& rng,
                              StatsEvents* events) {
  const double n_class = double(pre.global_class[std::size_t(c)].n);
  std::vector<NoisyStat> nodes;
  for (const auto& node : pre.node_class) {
    const auto& part = node[std::size_t(c)];
    if (part.n == 0) continue;
    const auto z = to_unit(part, pre.col);
    NoisyStat s = release_mean(z, eps, delta, rng);
    if (part.n >= 2) {
      const double vf_local = vf * std::sqrt(double(part.n) / n_class);
      s.var = release_variance(z, vf_local, eps, delta, rng);
      s.has_var = true;
    } else if (events) {
      ++events->variance_omitted;
    }
    nodes.push_back(s);
  }
  if (nodes.empty())
    throw DegenerateDataError("scenario 2: empty class across all shards");
  return pool_nodes(nodes, vf, events);
}

// Presentation releases: the overall column mean (Gaussian) and variance
// (log-normal), each with the full budget, mirroring the band plots.
double present_mean_global(const PartialStat& z_overall, const ColumnSpec& col,
                           const PrivacyParams& p, Rng& rng) {
  auto rel = release_mean(z_overall, p.epsilon, p.delta, rng);
  return col.lo + col.range() * rel.mean;
}

double present_var_global(const PartialStat& z_overall, const ColumnSpec& col,
                          const PrivacyParams& p, Rng& rng) {
  const double vf = vfloor_unit(col);
  const double v =
      release_variance(z_overall, vf, p.epsilon, p.delta, rng);
  return col.range() * col.range() * v;
}

}  // namespace

ScenarioPrecomp precompute_stats(const Shards& shards, int col,
                                 const StatsConfig& cfg) {
  FixedPointCodec codec;
  codec.fractional_bits = cfg.fractional_bits;
  codec.clip = std::max(1024.0, 2.0 * double(shards.total_rows()));
  return precompute_stats(shards, col, codec, cfg);
}

ScenarioPrecomp precompute_stats(const Shards& shards, int col,
                                 const FixedPointCodec& codec,
                                 const StatsConfig& cfg) {
  if (shards.node_tables.empty()) throw ConfigError("precompute: no shards");
  ScenarioPrecomp pre;
  pre.col = shards.node_tables.front().columns.at(std::size_t(col));
  pre.k = int(shards.node_tables.size());
  for (const auto& t : shards.node_tables) {
    const auto [a, b] = local_partials(t, col);
    pre.node_class.push_back({a, b});
    pre.node_overall.push_back(merge(a, b));
    pre.global_class[0] = merge(pre.global_class[0], a);
    pre.global_class[1] = merge(pre.global_class[1], b);
  }
  pre.global_overall = merge(pre.global_class[0], pre.global_class[1]);

  // One secure-aggregation round over the per-node z-space partials:
  // [n_a, sum_a, sumsq_a, n_b, sum_b, sumsq_b] per node.
  codec.check_headroom(pre.k);
  const auto seeds =
      PairwiseSeeds::derive(cfg.secure_root_secret, pre.k, std::uint64_t(col));
  std::vector<MaskedVector> shares;
  shares.reserve(std::size_t(pre.k));
  for (int node = 0; node < pre.k; ++node) {
    const auto za = to_unit(pre.node_class[std::size_t(node)][0], pre.col);
    const auto zb = to_unit(pre.node_class[std::size_t(node)][1], pre.col);
    const double payload[6] = {double(za.n), za.sum, za.sumsq,
                               double(zb.n), zb.sum, zb.sumsq};
    const auto encoded = codec.encode(payload, &pre.clip_events);
    shares.push_back(mask(encoded, node, seeds));
  }
  const auto decoded = aggregate(shares, pre.k, codec);
  pre.secure_class[0] = {(long long)std::llround(decoded[0]), decoded[1], decoded[2]};
  pre.secure_class[1] = {(long long)std::llround(decoded[3]), decoded[4], decoded[5]};
  pre.secure_overall = merge(pre.secure_class[0], pre.secure_class[1]);
  return pre;
}

DisclosedTrial trial_scenario1(const ScenarioPrecomp& pre,
                               const PrivacyParams& p, Rng& rng,
                               const StatsConfig& cfg, StatsEvents* events) {
  const std::array<PartialStat, 2> z{to_unit(pre.global_class[0], pre.col),
                                     to_unit(pre.global_class[1], pre.col)};
  DisclosedTrial out;
  out.mean = present_mean_global(to_unit(pre.global_overall, pre.col), pre.col,
                                 p, rng);
  out.var = present_var_global(to_unit(pre.global_overall, pre.col), pre.col,
                               p, rng);
  const TTestResult res =
      cfg.direct_laplace
          ? release_direct_laplace(z, pre.col, p, rng, cfg, Scenario::central)
          : release_global(z, pre.col, p, rng, cfg, Scenario::central, events);
  out.t = res.t;
  out.df = res.df;
  return out;
}

DisclosedTrial trial_scenario3(const ScenarioPrecomp& pre,
                               const PrivacyParams& p, Rng& rng,
                               const StatsConfig& cfg, StatsEvents* events) {
  DisclosedTrial out;
  out.mean = present_mean_global(pre.secure_overall, pre.col, p, rng);
  out.var = present_var_global(pre.secure_overall, pre.col, p, rng);
  const TTestResult res =
      cfg.direct_laplace
          ? release_direct_laplace(pre.secure_class, pre.col, p, rng, cfg,
                                   Scenario::secure)
          : release_global(pre.secure_class, pre.col, p, rng, cfg,
                           Scenario::secure, events);
  out.t = res.t;
  out.df = res.df;
  return out;
}

DisclosedTrial trial_scenario2(const ScenarioPrecomp& pre,
                               const PrivacyParams& p, Rng& rng,
                               const StatsConfig& cfg, StatsEvents* events) {
  const double eps = p.epsilon * cfg.budget_fraction;
  const double delta = p.delta * cfg.budget_fraction;
  const double vf = vfloor_unit(pre.col);
  if (pre.global_class[0].var_pop() == 0.0 &&
      pre.global_class[1].var_pop() == 0.0)
    throw DegenerateDataError("t statistic undefined: zero variance in both classes");

  DisclosedTrial out;

  // Presentation mean/variance: full-budget local releases, pooled.
  std::vector<NoisyStat> overall;
  overall.reserve(pre.node_overall.size());
  const double n_total = double(pre.global_overall.n);
  for (const auto& node : pre.node_overall) {
    if (node.n == 0) continue;
    const auto z = to_unit(node, pre.col);
    NoisyStat s = release_mean(z, p.epsilon, p.delta, rng);
    if (node.n >= 2) {
      const double vf_local = vf * std::sqrt(double(node.n) / n_total);
      s.var = release_variance(z, vf_local, p.epsilon, p.delta, rng);
      s.has_var = true;
    } else if (events) {
      ++events->variance_omitted;
    }
    overall.push_back(s);
  }
  const NoisyStat pooled_overall = pool_nodes(overall, vf, events);
  out.mean = pre.col.lo + pre.col.range() * pooled_overall.mean;
  out.var = pre.col.range() * pre.col.range() * pooled_overall.var;

  // The protected t statistic: per-node per-class releases at a quarter of
  // the budget, pooled server-side.
  NoisyStat cls[2];
  for (int c = 0; c < 2; ++c)
    cls[c] = class_release_local(pre, c, eps, delta, vf, rng, events);
  const TTestResult res =
      assemble(cls[0], cls[1], pre.col, Scenario::local, p.epsilon);
  out.t = res.t;
  out.df = res.df;
  return out;
}

namespace {

Shards single_shard(const Table& t) {
  Shards s;
  s.node_tables.push_back(t);
  return s;
}

}  // namespace

TTestResult run_scenario1(const Table& t, int col, const PrivacyParams& p,
                          Rng& rng, const StatsConfig& cfg,
                          StatsEvents* events) {
  const auto pre = precompute_stats(single_shard(t), col, cfg);
  const std::array<PartialStat, 2> z{to_unit(pre.global_class[0], pre.col),
                                     to_unit(pre.global_class[1], pre.col)};
  if (cfg.direct_laplace)
    return release_direct_laplace(z, pre.col, p, rng, cfg, Scenario::central);
  return release_global(z, pre.col, p, rng, cfg, Scenario::central, events);
}

TTestResult run_scenario2(const Shards& shards, int col,
                          const PrivacyParams& p, Rng& rng,
                          const StatsConfig& cfg, StatsEvents* events) {
  const auto pre = precompute_stats(shards, col, cfg);
  if (pre.global_class[0].var_pop() == 0.0 &&
      pre.global_class[1].var_pop() == 0.0)
    throw DegenerateDataError("t statistic undefined: zero variance in both classes");
  const double eps = p.epsilon * cfg.budget_fraction;
  const double delta = p.delta * cfg.budget_fraction;
  const double vf = vfloor_unit(pre.col);
  NoisyStat cls[2];
  for (int c = 0; c < 2; ++c)
    cls[c] = class_release_local(pre, c, eps, delta, vf, rng, events);
  return assemble(cls[0], cls[1], pre.col, Scenario::local, p.epsilon);
}

TTestResult run_scenario3(const Shards& shards, int col,
                          const PrivacyParams& p, const FixedPointCodec& codec,
                          Rng& rng, const StatsConfig& cfg,
                          StatsEvents* events) {
  const auto pre = precompute_stats(shards, col, codec, cfg);
  if (cfg.direct_laplace)
    return release_direct_laplace(pre.secure_class, pre.col, p, rng, cfg,
                                  Scenario::secure);
  return release_global(pre.secure_class, pre.col, p, rng, cfg,
                        Scenario::secure, events);
}

}  // namespace fedsandbox
