#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fedsandbox/dp_mech.hpp"
#include "fedsandbox/rng.hpp"
#include "fedsandbox/secure_agg.hpp"
#include "fedsandbox/table.hpp"

namespace fedsandbox {

enum class Scenario : int {
  central = 1,  // pooled plaintext data, one global DP release
  local = 2,    // plaintext partials, per-node local DP
  secure = 3,   // secure aggregation, one global DP release
};

const char* scenario_name(Scenario s);

// Exact per-node sufficient statistics for one column.
struct PartialStat {
  long long n = 0;
  double sum = 0.0;
  double sumsq = 0.0;

  double mean() const { return n > 0 ? sum / double(n) : 0.0; }
  // population variance (divisor n)
  double var_pop() const {
    if (n < 1) return 0.0;
    const double m = mean();
    return std::max(0.0, sumsq / double(n) - m * m);
  }
  // sample variance (divisor n-1)
  double var_sample() const {
    return n > 1 ? var_pop() * double(n) / double(n - 1) : 0.0;
  }
};

PartialStat merge(const PartialStat& a, const PartialStat& b);

// Per-class exact partials of `col` on this shard, split by the target.
std::pair<PartialStat, PartialStat> local_partials(const Table& t, int col);

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double mean_a = 0.0, mean_b = 0.0;
  double var_a = 0.0, var_b = 0.0;
  long long n_a = 0, n_b = 0;
  Scenario scenario = Scenario::central;
  double epsilon = 0.0;
};

// Welch two-sample t from exact aggregate partials (sample variances,
// Welch-Satterthwaite degrees of freedom).
TTestResult welch_t(const PartialStat& a, const PartialStat& b);

struct StatsConfig {
  // One t-test costs four releases (mean and variance for each class); the
  // (epsilon, delta) budget is split equally across them.
  double budget_fraction = 0.25;
  // Alternative single-release construction: clip the exact t to
  // [-t_clip, t_clip] and add Laplace(2 t_clip / epsilon).
  bool direct_laplace = false;
  double t_clip = 20.0;
  std::uint64_t secure_root_secret = 0xFED5EC;
  int fractional_bits = 16;
};

struct StatsEvents {
  std::size_t variance_omitted = 0;  // node class with n < 2 in scenario 2
  std::size_t variance_floored = 0;  // pooled variance pushed up to v_floor
  std::size_t clip_events = 0;       // fixed-point clipping during encoding
};

// One disclosed draw: the protected t statistic plus the stand-alone
// mean/variance presentation releases (full budget each) that the band
// figures plot.
struct DisclosedTrial {
  double t = 0.0;
  double df = 0.0;
  double mean = 0.0;
  double var = 0.0;
};

// Everything about (shards, column) that does not change between noise
// trials: exact partials per node, their merge, and the quantized global
// partials recovered through the secure-aggregation pipeline.
struct ScenarioPrecomp {
  ColumnSpec col;
  int k = 1;
  std::vector<std::array<PartialStat, 2>> node_class;  // x-space
  std::vector<PartialStat> node_overall;               // x-space
  std::array<PartialStat, 2> global_class;             // x-space
  PartialStat global_overall;                          // x-space
  std::array<PartialStat, 2> secure_class;   // z-space, quantized
  PartialStat secure_overall;                // z-space, quantized
  std::size_t clip_events = 0;
};

ScenarioPrecomp precompute_stats(const Shards& shards, int col,
                                 const StatsConfig& cfg = {});
ScenarioPrecomp precompute_stats(const Shards& shards, int col,
                                 const FixedPointCodec& codec,
                                 const StatsConfig& cfg = {});

// Per-trial disclosed draws; `p` carries the total (epsilon, delta).
DisclosedTrial trial_scenario1(const ScenarioPrecomp& pre,
                               const PrivacyParams& p, Rng& rng,
                               const StatsConfig& cfg = {},
                               StatsEvents* events = nullptr);
DisclosedTrial trial_scenario2(const ScenarioPrecomp& pre,
                               const PrivacyParams& p, Rng& rng,
                               const StatsConfig& cfg = {},
                               StatsEvents* events = nullptr);
DisclosedTrial trial_scenario3(const ScenarioPrecomp& pre,
                               const PrivacyParams& p, Rng& rng,
                               const StatsConfig& cfg = {},
                               StatsEvents* events = nullptr);

// Whole-run entry points built on the precompute + trial pair.
TTestResult run_scenario1(const Table& t, int col, const PrivacyParams& p,
                          Rng& rng, const StatsConfig& cfg = {},
                          StatsEvents* events = nullptr);
TTestResult run_scenario2(const Shards& shards, int col,
                          const PrivacyParams& p, Rng& rng,
                          const StatsConfig& cfg = {},
                          StatsEvents* events = nullptr);
TTestResult run_scenario3(const Shards& shards, int col,
                          const PrivacyParams& p, const FixedPointCodec& codec,
                          Rng& rng, const StatsConfig& cfg = {},
                          StatsEvents* events = nullptr);

}  // namespace fedsandbox
