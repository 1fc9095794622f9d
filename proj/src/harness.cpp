#include "fedsandbox/harness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fedsandbox/error.hpp"
#include "fedsandbox/rdp.hpp"
#include "fedsandbox/stats_math.hpp"
#include "fedsandbox/svg.hpp"
#include "fedsandbox/synth.hpp"

namespace fedsandbox {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kShardTag = 0x54A6D;
constexpr std::uint64_t kSplitTag = 0x591717;
constexpr std::uint64_t kTrialTag = 0x7121A1;
constexpr std::uint64_t kTrainTag = 0x7BA17;
constexpr std::uint64_t kPartTag = 0x9A87;

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::stod(s);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// Tiny reader for the sweep CSVs this module writes itself.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return int(i);
    throw ParseError("result CSV: missing column " + name);
  }
  const std::string& at(std::size_t r, int c) const {
    return rows[r][std::size_t(c)];
  }
};

CsvTable read_result_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty");
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    t.rows.push_back(split_csv_line(line));
  }
  return t;
}

void write_meta(const std::string& path,
                const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
}

int scenario_id(Scenario s) { return int(s); }

Scenario scenario_from_int(int v) {
  switch (v) {
    case 1: return Scenario::central;
    case 2: return Scenario::local;
    case 3: return Scenario::secure;
  }
  throw ConfigError("unknown scenario id " + std::to_string(v));
}

}  // namespace

std::vector<double> log_grid(double lo, double hi, int points) {
  if (!(lo > 0) || !(hi > lo) || points < 2)
    throw ConfigError("log_grid: need 0 < lo < hi and >= 2 points");
  std::vector<double> grid(static_cast<std::size_t>(points));
  const double llo = std::log10(lo), lhi = std::log10(hi);
  for (int i = 0; i < points; ++i)
    grid[std::size_t(i)] =
        std::pow(10.0, llo + (lhi - llo) * double(i) / double(points - 1));
  grid.front() = lo;
  grid.back() = hi;
  return grid;
}

SweepConfig finalize(SweepConfig cfg, bool training) {
  if (cfg.eps_grid.empty())
    cfg.eps_grid = log_grid(0.01, 100.0, cfg.desk ? 9 : 25);
  for (std::size_t i = 1; i < cfg.eps_grid.size(); ++i)
    if (!(cfg.eps_grid[i] > cfg.eps_grid[i - 1]))
      throw ConfigError("epsilon grid must be strictly increasing");
  if (cfg.ks.empty())
    cfg.ks = cfg.desk ? std::vector<int>{1, 4, 16, 64}
                      : std::vector<int>{1, 2, 4, 8, 16, 32, 64};
  if (cfg.scenarios.empty())
    cfg.scenarios = {Scenario::central, Scenario::local, Scenario::secure};
  if (cfg.trials <= 0) cfg.trials = cfg.desk ? 2000 : 10000;
  if (training && cfg.train_trials < 50)
    throw ConfigError("training sweeps need at least 50 trials per cell");
  if (!training && cfg.trials < 50)
    throw ConfigError("sweeps need at least 50 trials per cell");
  if (cfg.dataset == "brfss" && cfg.desk && cfg.max_rows == 0)
    cfg.max_rows = 20000;
  return cfg;
}

DatasetBundle load_bundle(const SweepConfig& cfg) {
  DatasetBundle b;
  const std::string schema_path =
      (fs::path(cfg.schema_dir) / (cfg.dataset + ".schema")).string();
  b.schema = DatasetSchema::parse_file(schema_path);
  const std::string data_dir = resolve_data_dir(cfg.data_dir);
  b.csv_path = ensure_dataset_csv(cfg.dataset, data_dir);
  LoadOptions opts;
  opts.max_rows = cfg.max_rows;
  opts.subsample_seed = cfg.master_seed;
  b.clean = load_csv(b.csv_path, b.schema, opts);
  b.split = balanced_split(b.clean, derive_seed(cfg.master_seed, kSplitTag));
  b.train_enc = encode_features(b.split.train);
  b.test_enc = encode_features(b.split.test);
  b.sel_col = selected_column(b.clean, b.schema);
  return b;
}

void for_each_cell_trial(std::size_t cells, int trials, int threads,
                         const std::function<void(std::size_t, int)>& fn) {
  if (threads == 1) {
    // Serial reference engine, kept as the ground truth for the parallel
    // path; the benchmark and the determinism tests compare against it.
    for (std::size_t c = 0; c < cells; ++c)
      for (int t = 0; t < trials; ++t) fn(c, t);
    return;
  }
#ifdef _OPENMP
  const long long total = (long long)(cells)*trials;
  const int want = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 16) num_threads(want)
  for (long long i = 0; i < total; ++i)
    fn(std::size_t(i / trials), int(i % trials));
#else
  for (std::size_t c = 0; c < cells; ++c)
    for (int t = 0; t < trials; ++t) fn(c, t);
#endif
}

namespace {

struct CellKey {
  Scenario sc;
  int k;
  double eps;
};

// central runs once (K has no meaning there); federated scenarios run per K.
std::vector<CellKey> make_cells(const SweepConfig& cfg) {
  std::vector<CellKey> cells;
  for (const Scenario sc : cfg.scenarios) {
    const std::vector<int> ks =
        sc == Scenario::central ? std::vector<int>{1} : cfg.ks;
    for (const int k : ks)
      for (const double eps : cfg.eps_grid) cells.push_back({sc, k, eps});
  }
  return cells;
}

double band_edge(std::vector<double>& samples, double p) {
  std::sort(samples.begin(), samples.end());
  return quantile_sorted(samples, p);
}

}  // namespace

StatsSweepResult sweep_tstat(const SweepConfig& raw) {
  const SweepConfig cfg = finalize(raw, false);
  const DatasetBundle bundle = load_bundle(cfg);

  StatsSweepResult res;
  res.cfg = cfg;

  StatsConfig scfg;
  scfg.direct_laplace = cfg.direct_laplace;

  // Shards and exact partials per federation size, shared by every cell.
  std::map<int, ScenarioPrecomp> pre;
  for (const int k : cfg.ks) {
    const Shards sh =
        shard(bundle.clean, k, derive_seed(cfg.master_seed, kShardTag,
                                           std::uint64_t(k)));
    pre.emplace(k, precompute_stats(sh, bundle.sel_col, scfg));
  }
  if (!pre.count(1)) {
    const Shards sh = shard(bundle.clean, 1,
                            derive_seed(cfg.master_seed, kShardTag, 1));
    pre.emplace(1, precompute_stats(sh, bundle.sel_col, scfg));
  }

  const auto& base = pre.at(1);
  const TTestResult plain = welch_t(base.global_class[0], base.global_class[1]);
  res.truth_t = plain.t;
  res.df_plain = plain.df;
  res.t_crit = student_t_critical(plain.df, cfg.alpha);
  res.truth_mean = base.global_overall.mean();
  res.truth_var = base.global_overall.var_sample();

  const auto cells = make_cells(cfg);
  const int trials = cfg.trials;
  std::vector<double> t_buf(cells.size() * std::size_t(trials));
  std::vector<double> mean_buf(t_buf.size());
  std::vector<double> var_buf(t_buf.size());
  std::vector<std::uint8_t> floored_buf(t_buf.size(), 0);

  for_each_cell_trial(
      cells.size(), trials, cfg.threads, [&](std::size_t c, int trial) {
        const CellKey& cell = cells[c];
        const std::size_t slot = c * std::size_t(trials) + std::size_t(trial);
        Rng rng(derive_seed(cfg.master_seed, kTrialTag, c,
                            std::uint64_t(trial)));
        const PrivacyParams p{cell.eps, bundle.schema.delta, 0.0};
        StatsEvents ev;
        try {
          DisclosedTrial d;
          const auto& pc = pre.at(cell.k);
          switch (cell.sc) {
            case Scenario::central:
              d = trial_scenario1(pre.at(1), p, rng, scfg, &ev);
              break;
            case Scenario::local:
              d = trial_scenario2(pc, p, rng, scfg, &ev);
              break;
            case Scenario::secure:
              d = trial_scenario3(pc, p, rng, scfg, &ev);
              break;
          }
          t_buf[slot] = d.t;
          mean_buf[slot] = d.mean;
          var_buf[slot] = d.var;
          floored_buf[slot] = std::uint8_t(ev.variance_floored);
        } catch (const Error&) {
          t_buf[slot] = std::numeric_limits<double>::quiet_NaN();
          mean_buf[slot] = std::numeric_limits<double>::quiet_NaN();
          var_buf[slot] = std::numeric_limits<double>::quiet_NaN();
        }
      });

  res.cells.reserve(cells.size());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    StatsCell out;
    out.scenario = cells[c].sc;
    out.k = cells[c].k;
    out.eps = cells[c].eps;
    out.trials = trials;
    std::vector<double> ts, means, vars;
    ts.reserve(std::size_t(trials));
    for (int t = 0; t < trials; ++t) {
      const std::size_t slot = c * std::size_t(trials) + std::size_t(t);
      if (std::isnan(t_buf[slot])) {
        ++out.failures;
        continue;
      }
      ts.push_back(t_buf[slot]);
      means.push_back(mean_buf[slot]);
      vars.push_back(var_buf[slot]);
      out.var_floored_total += floored_buf[slot];
    }
    if (!ts.empty()) {
      out.t_lo = band_edge(ts, 0.025);
      out.t_hi = quantile_sorted(ts, 0.975);
      out.mean_lo = band_edge(means, 0.025);
      out.mean_hi = quantile_sorted(means, 0.975);
      out.var_lo = band_edge(vars, 0.025);
      out.var_hi = quantile_sorted(vars, 0.975);
    } else {
      out.t_lo = out.t_hi = out.mean_lo = out.mean_hi = out.var_lo =
          out.var_hi = std::numeric_limits<double>::quiet_NaN();
    }
    // structural per-trial omissions in scenario 2: node-classes too small
    // to release a variance
    if (cells[c].sc == Scenario::local) {
      const auto& pc = pre.at(cells[c].k);
      for (const auto& node : pc.node_class)
        for (int cls = 0; cls < 2; ++cls)
          if (node[std::size_t(cls)].n == 1) ++out.var_omitted_per_trial;
    }
    res.cells.push_back(out);
  }
  return res;
}

namespace {

std::vector<std::pair<std::string, std::string>> common_meta(
    const SweepConfig& cfg, const DatasetSchema& schema) {
  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("dataset", cfg.dataset);
  kv.emplace_back("delta", fmt_double(schema.delta));
  kv.emplace_back("master_seed", std::to_string(cfg.master_seed));
  kv.emplace_back("trials", std::to_string(cfg.trials));
  kv.emplace_back("alpha", fmt_double(cfg.alpha));
  kv.emplace_back("eps_grid_points", std::to_string(cfg.eps_grid.size()));
  kv.emplace_back("eps_min", fmt_double(cfg.eps_grid.front()));
  kv.emplace_back("eps_max", fmt_double(cfg.eps_grid.back()));
  kv.emplace_back("neighbour_relation", "replace-one (bounded, public n)");
  kv.emplace_back("gaussian_calibration",
                  "classic sqrt(2 ln(1.25/delta))/eps for eps<=1, analytic "
                  "binary search above");
  return kv;
}

}  // namespace

std::string write_stats_outputs(const StatsSweepResult& res) {
  const SweepConfig& cfg = res.cfg;
  fs::create_directories(cfg.out_dir);
  const std::string csv_path =
      (fs::path(cfg.out_dir) / ("sweep_stats_" + cfg.dataset + ".csv"))
          .string();
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw Error("cannot write " + csv_path);
  out << "dataset,scenario,k,eps,trials,failures,truth_t,df_plain,t_crit,"
         "truth_mean,truth_var,t_lo,t_hi,mean_lo,mean_hi,var_lo,var_hi,"
         "var_omitted_per_trial,var_floored_total\n";
  for (const auto& c : res.cells) {
    out << cfg.dataset << ',' << scenario_id(c.scenario) << ',' << c.k << ','
        << fmt_double(c.eps) << ',' << c.trials << ',' << c.failures << ','
        << fmt_double(res.truth_t) << ',' << fmt_double(res.df_plain) << ','
        << fmt_double(res.t_crit) << ',' << fmt_double(res.truth_mean) << ','
        << fmt_double(res.truth_var) << ',' << fmt_double(c.t_lo) << ','
        << fmt_double(c.t_hi) << ',' << fmt_double(c.mean_lo) << ','
        << fmt_double(c.mean_hi) << ',' << fmt_double(c.var_lo) << ','
        << fmt_double(c.var_hi) << ',' << c.var_omitted_per_trial << ','
        << c.var_floored_total << '\n';
  }
  out.close();

  const DatasetSchema schema = DatasetSchema::parse_file(
      (fs::path(cfg.schema_dir) / (cfg.dataset + ".schema")).string());
  auto kv = common_meta(cfg, schema);
  kv.emplace_back("sweep", "stats");
  kv.emplace_back("budget_split",
                  "epsilon/4 and delta/4 per release (mean, variance x 2 "
                  "classes)");
  kv.emplace_back("tstat_mechanism",
                  cfg.direct_laplace ? "clipped t + Laplace (direct variant)"
                                     : "combined gaussian mean + lognormal "
                                       "variance");
  kv.emplace_back("variance_release",
                  "lognormal exp(N(-s^2/2, s^2)) on the floored population "
                  "variance, rescaled to the sample convention");
  kv.emplace_back("selected_column_rule",
                  schema.selected.empty() ? "top |standardized mean diff|"
                                          : "schema: " + schema.selected);
  kv.emplace_back("critical_rule",
                  "smallest grid eps with the whole 95% band on the "
                  "significant side of t_crit (sign-aware, nearest-zero "
                  "edge), log-interpolated");
  write_meta((fs::path(cfg.out_dir) / ("sweep_stats_" + cfg.dataset + ".meta"))
                 .string(),
             kv);
  return csv_path;
}

TrainSweepResult sweep_training(const SweepConfig& raw) {
  const SweepConfig cfg = finalize(raw, true);
  const DatasetBundle bundle = load_bundle(cfg);

  TrainSweepResult res;
  res.cfg = cfg;

  TrainConfig base_cfg;
  base_cfg.lr = cfg.lr;
  base_cfg.max_batch = cfg.max_batch;
  base_cfg.epochs = cfg.epochs;
  base_cfg.clip_norm = cfg.clip_norm;
  base_cfg.delta = bundle.schema.delta;

  // Shared non-private baseline accuracies. Baseline and every DP cell use
  // the same per-trial seeds (common random numbers): at large epsilon the
  // trajectories coincide, so the equivalence tests compare like with like
  // instead of tripping over seed-set luck.
  const int base_trials = cfg.train_trials;
  std::vector<double> base_acc(static_cast<std::size_t>(base_trials));
  {
    TrainConfig plain = base_cfg;
    plain.dp = false;
    for_each_cell_trial(1, base_trials, cfg.threads, [&](std::size_t, int t) {
      const auto r = train(bundle.train_enc, plain,
                           derive_seed(cfg.master_seed, kTrainTag,
                                       std::uint64_t(t)));
      base_acc[std::size_t(t)] = evaluate(r.model, bundle.test_enc);
    });
  }
  double bm = 0, bv = 0;
  for (const double a : base_acc) bm += a;
  bm /= double(base_trials);
  for (const double a : base_acc) bv += (a - bm) * (a - bm);
  bv /= double(base_trials - 1);
  res.base_trials = base_trials;
  res.base_mean = bm;
  res.base_var = bv;

  // Row partitions per federation size.
  std::map<int, std::vector<std::vector<std::uint32_t>>> parts;
  for (const int k : cfg.ks)
    parts.emplace(k, partition_rows(bundle.train_enc.rows, k,
                                    derive_seed(cfg.master_seed, kPartTag,
                                                std::uint64_t(k))));

  // One sigma calibration per epsilon (central and secure share it).
  const long long steps =
      ((long long)(bundle.train_enc.rows) + cfg.max_batch - 1) /
      std::max(1, cfg.max_batch) * cfg.epochs;
  const double q =
      std::min(1.0, double(cfg.max_batch) / double(bundle.train_enc.rows));
  std::map<double, double> sigma_by_eps;
  for (const double eps : cfg.eps_grid) {
    try {
      sigma_by_eps[eps] =
          calibrate_sigma(eps, bundle.schema.delta, q, steps);
    } catch (const CalibrationError&) {
      sigma_by_eps[eps] = -1.0;
    }
  }

  const auto cells = make_cells(cfg);
  std::vector<double> acc_buf(cells.size() * std::size_t(cfg.train_trials),
                              std::numeric_limits<double>::quiet_NaN());
  std::vector<double> eps_buf(acc_buf.size(), 0.0);
  std::vector<double> sig_buf(acc_buf.size(), 0.0);

  for_each_cell_trial(
      cells.size(), cfg.train_trials, cfg.threads,
      [&](std::size_t c, int trial) {
        const CellKey& cell = cells[c];
        const std::size_t slot =
            c * std::size_t(cfg.train_trials) + std::size_t(trial);
        TrainConfig tc = base_cfg;
        tc.target_eps = cell.eps;
        tc.scenario = cell.sc;
        if (cell.sc != Scenario::local) {
          const double sigma = sigma_by_eps.at(cell.eps);
          if (sigma <= 0) return;  // calibration failed; recorded as failure
          tc.sigma_override = sigma;
        }
        const std::uint64_t seed =
            derive_seed(cfg.master_seed, kTrainTag, std::uint64_t(trial));
        try {
          const TrainResult r =
              cell.sc == Scenario::central
                  ? train(bundle.train_enc, tc, seed)
                  : train_federated(bundle.train_enc, parts.at(cell.k), tc,
                                    seed);
          acc_buf[slot] = evaluate(r.model, bundle.test_enc);
          eps_buf[slot] = r.achieved_eps;
          sig_buf[slot] = r.sigma;
        } catch (const Error&) {
          // leave NaN
        }
      });

  for (std::size_t c = 0; c < cells.size(); ++c) {
    TrainCell out;
    out.scenario = cells[c].sc;
    out.k = cells[c].k;
    out.eps = cells[c].eps;
    out.trials = cfg.train_trials;
    out.steps = steps;
    out.q = q;
    std::vector<double> accs;
    for (int t = 0; t < cfg.train_trials; ++t) {
      const std::size_t slot =
          c * std::size_t(cfg.train_trials) + std::size_t(t);
      if (std::isnan(acc_buf[slot])) {
        ++out.failures;
        continue;
      }
      accs.push_back(acc_buf[slot]);
      out.achieved_eps = eps_buf[slot];
      out.sigma = sig_buf[slot];
    }
    if (accs.size() >= 2) {
      double m = 0, v = 0;
      for (const double a : accs) m += a;
      m /= double(accs.size());
      for (const double a : accs) v += (a - m) * (a - m);
      v /= double(accs.size() - 1);
      out.acc_mean = m;
      out.acc_var = v;
      if (v <= 0 && res.base_var <= 0) {
        out.welch_p = (m == res.base_mean) ? 1.0 : 0.0;
      } else {
        out.welch_p =
            welch_from_moments(m, v, double(accs.size()), res.base_mean,
                               res.base_var, double(res.base_trials))
                .p_value;
      }
    } else {
      out.acc_mean = out.acc_var = std::numeric_limits<double>::quiet_NaN();
      out.welch_p = 0.0;  // unusable cell rejects
    }
    res.cells.push_back(out);
  }

  if (!cfg.export_model_path.empty()) {
    // Export one model for inspection: central scenario at the largest grid
    // epsilon, first trial seed.
    TrainConfig tc = base_cfg;
    tc.target_eps = cfg.eps_grid.back();
    const double sigma = sigma_by_eps.at(tc.target_eps);
    if (sigma > 0) tc.sigma_override = sigma;
    const auto r = train(bundle.train_enc, tc,
                         derive_seed(cfg.master_seed, kTrainTag,
                                     std::uint64_t(0)));
    export_model(r.model, bundle.train_enc.feature_names,
                 cfg.export_model_path);
  }
  return res;
}

std::string write_train_outputs(const TrainSweepResult& res) {
  const SweepConfig& cfg = res.cfg;
  fs::create_directories(cfg.out_dir);
  const std::string csv_path =
      (fs::path(cfg.out_dir) / ("sweep_train_" + cfg.dataset + ".csv"))
          .string();
  std::ofstream out(csv_path, std::ios::binary);
  if (!out) throw Error("cannot write " + csv_path);
  out << "dataset,scenario,k,eps,trials,failures,acc_mean,acc_var,sigma,"
         "achieved_eps,steps,q,welch_p,base_trials,base_mean,base_var\n";
  for (const auto& c : res.cells) {
    out << cfg.dataset << ',' << scenario_id(c.scenario) << ',' << c.k << ','
        << fmt_double(c.eps) << ',' << c.trials << ',' << c.failures << ','
        << fmt_double(c.acc_mean) << ',' << fmt_double(c.acc_var) << ','
        << fmt_double(c.sigma) << ',' << fmt_double(c.achieved_eps) << ','
        << c.steps << ',' << fmt_double(c.q) << ',' << fmt_double(c.welch_p)
        << ',' << res.base_trials << ',' << fmt_double(res.base_mean) << ','
        << fmt_double(res.base_var) << '\n';
  }
  out.close();

  const DatasetSchema schema = DatasetSchema::parse_file(
      (fs::path(cfg.schema_dir) / (cfg.dataset + ".schema")).string());
  auto kv = common_meta(cfg, schema);
  kv.emplace_back("sweep", "train");
  kv.emplace_back("trials_per_cell", std::to_string(cfg.train_trials));
  kv.emplace_back("epochs", std::to_string(cfg.epochs));
  kv.emplace_back("lr", fmt_double(cfg.lr));
  kv.emplace_back("max_batch", std::to_string(cfg.max_batch));
  kv.emplace_back("clip_norm", fmt_double(cfg.clip_norm));
  kv.emplace_back("features", "min-max scaled by codebook bounds; one-hot "
                              "with first category dropped");
  kv.emplace_back("local_budget_rule",
                  "per-node sigma calibrated at q_local = "
                  "min(1, max_batch/(K n_local)) with the full (eps, delta)");
  kv.emplace_back("secure_noise_rule",
                  "per-node N(0, sigma^2 C^2 / K); masked fixed-point "
                  "aggregation carries the sum");
  kv.emplace_back("critical_rule",
                  "smallest grid eps whose Welch test vs baseline stops "
                  "rejecting and stays non-rejecting at larger eps");
  write_meta((fs::path(cfg.out_dir) / ("sweep_train_" + cfg.dataset + ".meta"))
                 .string(),
             kv);
  return csv_path;
}

std::string format_critical(const CriticalEps& c) {
  switch (c.state) {
    case CriticalEps::State::not_applicable:
      return "n/a";
    case CriticalEps::State::above_grid:
      return ">100";
    case CriticalEps::State::value: {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.2g", c.eps);
      return buf;
    }
  }
  return "n/a";
}

CriticalEps critical_eps_tstat(const std::vector<double>& eps_grid,
                               const std::vector<double>& band_lo,
                               const std::vector<double>& band_hi,
                               double truth_t, double df_plain, double alpha) {
  CriticalEps out;
  if (!std::isfinite(truth_t) || !std::isfinite(df_plain) || df_plain <= 0)
    return out;
  const double t_crit = student_t_critical(df_plain, alpha);
  if (std::abs(truth_t) <= t_crit) return out;  // test not significant at all

  // Sign-aware edge nearest zero: the band must clear t_crit on the side of
  // the plaintext t.
  const auto edge = [&](std::size_t i) {
    return truth_t > 0 ? band_lo[i] : -band_hi[i];
  };
  const auto qualifies = [&](std::size_t i) {
    const double e = edge(i);
    return std::isfinite(e) && e >= t_crit;
  };
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (!qualifies(i)) continue;
    out.state = CriticalEps::State::value;
    if (i == 0) {
      out.eps = eps_grid[0];
    } else {
      const double e0 = edge(i - 1), e1 = edge(i);
      if (!std::isfinite(e0) || e1 <= e0) {
        out.eps = eps_grid[i];
      } else {
        const double x0 = std::log(eps_grid[i - 1]);
        const double x1 = std::log(eps_grid[i]);
        const double f = std::clamp((t_crit - e0) / (e1 - e0), 0.0, 1.0);
        out.eps = std::exp(x0 + f * (x1 - x0));
      }
    }
    return out;
  }
  out.state = CriticalEps::State::above_grid;
  return out;
}

CriticalEps critical_eps_training(const std::vector<double>& eps_grid,
                                  const std::vector<double>& welch_p,
                                  double alpha) {
  CriticalEps out;
  if (eps_grid.size() != welch_p.size() || eps_grid.empty()) return out;
  // stability rule: the cell and every larger-eps cell must be
  // non-rejecting
  std::size_t first = eps_grid.size();
  for (std::size_t i = eps_grid.size(); i-- > 0;) {
    if (welch_p[i] >= alpha)
      first = i;
    else
      break;
  }
  if (first == eps_grid.size()) {
    out.state = CriticalEps::State::above_grid;
    return out;
  }
  out.state = CriticalEps::State::value;
  out.eps = eps_grid[first];
  return out;
}

namespace {

struct SeriesKey {
  int scenario;
  int k;
  bool operator<(const SeriesKey& o) const {
    return scenario != o.scenario ? scenario < o.scenario : k < o.k;
  }
};

struct StatsSeries {
  std::vector<double> eps, t_lo, t_hi, mean_lo, mean_hi, var_lo, var_hi;
  double truth_t = 0, df_plain = 0, t_crit = 0, truth_mean = 0, truth_var = 0;
};

std::map<SeriesKey, StatsSeries> stats_series(const CsvTable& t) {
  std::map<SeriesKey, StatsSeries> out;
  const int c_sc = t.col("scenario"), c_k = t.col("k"), c_eps = t.col("eps");
  const int c_tlo = t.col("t_lo"), c_thi = t.col("t_hi");
  const int c_mlo = t.col("mean_lo"), c_mhi = t.col("mean_hi");
  const int c_vlo = t.col("var_lo"), c_vhi = t.col("var_hi");
  const int c_tt = t.col("truth_t"), c_df = t.col("df_plain"),
            c_tc = t.col("t_crit"), c_tm = t.col("truth_mean"),
            c_tv = t.col("truth_var");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const SeriesKey key{std::stoi(t.at(r, c_sc)), std::stoi(t.at(r, c_k))};
    auto& s = out[key];
    s.eps.push_back(parse_double(t.at(r, c_eps)));
    s.t_lo.push_back(parse_double(t.at(r, c_tlo)));
    s.t_hi.push_back(parse_double(t.at(r, c_thi)));
    s.mean_lo.push_back(parse_double(t.at(r, c_mlo)));
    s.mean_hi.push_back(parse_double(t.at(r, c_mhi)));
    s.var_lo.push_back(parse_double(t.at(r, c_vlo)));
    s.var_hi.push_back(parse_double(t.at(r, c_vhi)));
    s.truth_t = parse_double(t.at(r, c_tt));
    s.df_plain = parse_double(t.at(r, c_df));
    s.t_crit = parse_double(t.at(r, c_tc));
    s.truth_mean = parse_double(t.at(r, c_tm));
    s.truth_var = parse_double(t.at(r, c_tv));
  }
  return out;
}

struct TrainSeries {
  std::vector<double> eps, acc_mean, acc_var, welch_p;
  double base_mean = 0, base_var = 0;
  int base_trials = 0;
};

std::map<SeriesKey, TrainSeries> train_series(const CsvTable& t) {
  std::map<SeriesKey, TrainSeries> out;
  const int c_sc = t.col("scenario"), c_k = t.col("k"), c_eps = t.col("eps");
  const int c_am = t.col("acc_mean"), c_av = t.col("acc_var"),
            c_p = t.col("welch_p");
  const int c_bt = t.col("base_trials"), c_bm = t.col("base_mean"),
            c_bv = t.col("base_var");
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const SeriesKey key{std::stoi(t.at(r, c_sc)), std::stoi(t.at(r, c_k))};
    auto& s = out[key];
    s.eps.push_back(parse_double(t.at(r, c_eps)));
    s.acc_mean.push_back(parse_double(t.at(r, c_am)));
    s.acc_var.push_back(parse_double(t.at(r, c_av)));
    s.welch_p.push_back(parse_double(t.at(r, c_p)));
    s.base_trials = std::stoi(t.at(r, c_bt));
    s.base_mean = parse_double(t.at(r, c_bm));
    s.base_var = parse_double(t.at(r, c_bv));
  }
  return out;
}

std::map<std::string, std::string> find_sweeps(const std::string& in_dir,
                                               const std::string& prefix) {
  std::map<std::string, std::string> out;  // dataset -> path
  if (!fs::exists(in_dir)) return out;
  for (const auto& entry : fs::directory_iterator(in_dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind(prefix, 0) == 0 && name.size() > prefix.size() + 4 &&
        name.substr(name.size() - 4) == ".csv") {
      out[name.substr(prefix.size(), name.size() - prefix.size() - 4)] =
          entry.path().string();
    }
  }
  return out;
}

}  // namespace

void emit_tables(const std::string& in_dir, const std::string& out_dir,
                 double alpha) {
  fs::create_directories(out_dir);

  // Experiment 1 table: baseline row = centralized (scenario 1; scenario 3
  // matches it), federated rows = plaintext partials (scenario 2) per K.
  {
    const auto sweeps = find_sweeps(in_dir, "sweep_stats_");
    std::map<std::string, std::map<std::string, std::string>> cells;
    std::set<int> ks;
    std::vector<std::pair<std::string, std::string>> meta;
    for (const auto& [dataset, path] : sweeps) {
      const auto series = stats_series(read_result_csv(path));
      for (const auto& [key, s] : series) {
        const auto crit = critical_eps_tstat(s.eps, s.t_lo, s.t_hi, s.truth_t,
                                             s.df_plain, alpha);
        if (key.scenario == scenario_id(Scenario::central)) {
          cells["baseline"][dataset] = format_critical(crit);
        } else if (key.scenario == scenario_id(Scenario::local) && key.k > 1) {
          ks.insert(key.k);
          cells["K=" + std::to_string(key.k)][dataset] = format_critical(crit);
        } else if (key.scenario == scenario_id(Scenario::secure)) {
          meta.emplace_back("secure_critical_" + dataset + "_k" +
                                std::to_string(key.k),
                            format_critical(crit));
        }
      }
    }
    std::ofstream out((fs::path(out_dir) / "dp_stats.csv").string(),
                      std::ios::binary);
    out << "row";
    for (const auto& [dataset, _] : sweeps) out << ',' << dataset;
    out << '\n';
    std::vector<std::string> rows{"baseline"};
    for (const int k : ks) rows.push_back("K=" + std::to_string(k));
    for (const auto& row : rows) {
      out << row;
      for (const auto& [dataset, _] : sweeps) {
        const auto it = cells[row].find(dataset);
        out << ',' << (it == cells[row].end() ? "n/a" : it->second);
      }
      out << '\n';
    }
    meta.emplace_back("alpha", fmt_double(alpha));
    meta.emplace_back("baseline_row", "scenario 1 (scenario 3 equivalent)");
    meta.emplace_back("federated_rows", "scenario 2 per federation size");
    write_meta((fs::path(out_dir) / "dp_stats.meta").string(), meta);
  }

  // Experiment 2 table, same shape.
  {
    const auto sweeps = find_sweeps(in_dir, "sweep_train_");
    std::map<std::string, std::map<std::string, std::string>> cells;
    std::set<int> ks;
    std::vector<std::pair<std::string, std::string>> meta;
    for (const auto& [dataset, path] : sweeps) {
      const auto series = train_series(read_result_csv(path));
      for (const auto& [key, s] : series) {
        const auto crit = critical_eps_training(s.eps, s.welch_p, alpha);
        if (key.scenario == scenario_id(Scenario::central)) {
          cells["baseline"][dataset] = format_critical(crit);
        } else if (key.scenario == scenario_id(Scenario::local) && key.k > 1) {
          ks.insert(key.k);
          cells["K=" + std::to_string(key.k)][dataset] = format_critical(crit);
        } else if (key.scenario == scenario_id(Scenario::secure)) {
          meta.emplace_back("secure_critical_" + dataset + "_k" +
                                std::to_string(key.k),
                            format_critical(crit));
        }
      }
    }
    std::ofstream out((fs::path(out_dir) / "dp_train.csv").string(),
                      std::ios::binary);
    out << "row";
    for (const auto& [dataset, _] : sweeps) out << ',' << dataset;
    out << '\n';
    std::vector<std::string> rows{"baseline"};
    for (const int k : ks) rows.push_back("K=" + std::to_string(k));
    for (const auto& row : rows) {
      out << row;
      for (const auto& [dataset, _] : sweeps) {
        const auto it = cells[row].find(dataset);
        out << ',' << (it == cells[row].end() ? "n/a" : it->second);
      }
      out << '\n';
    }
    meta.emplace_back("alpha", fmt_double(alpha));
    meta.emplace_back("baseline_row", "scenario 1 (scenario 3 equivalent)");
    meta.emplace_back("federated_rows", "scenario 2 per federation size");
    write_meta((fs::path(out_dir) / "dp_train.meta").string(), meta);
  }
}

void emit_figures(const std::string& in_dir, const std::string& out_dir,
                  double alpha) {
  fs::create_directories(out_dir);
  for (const auto& [dataset, path] : find_sweeps(in_dir, "sweep_stats_")) {
    const auto series = stats_series(read_result_csv(path));
    const auto central = series.find(
        SeriesKey{scenario_id(Scenario::central), 1});
    if (central != series.end()) {
      const auto& s = central->second;
      BandPlot mean_plot(dataset + ": disclosed mean (central, K=1)",
                         "privacy parameter epsilon", "disclosed mean");
      mean_plot.add_band(s.eps, s.mean_lo, s.mean_hi, "95% band");
      mean_plot.add_hline(s.truth_mean, "true mean", false);
      mean_plot.write(
          (fs::path(out_dir) / ("fig_" + dataset + "_mean_central.svg"))
              .string());

      BandPlot var_plot(dataset + ": disclosed variance (central, K=1)",
                        "privacy parameter epsilon", "disclosed variance");
      var_plot.add_band(s.eps, s.var_lo, s.var_hi, "95% band");
      var_plot.add_hline(s.truth_var, "true variance", false);
      var_plot.write(
          (fs::path(out_dir) / ("fig_" + dataset + "_var_central.svg"))
              .string());
    }

    BandPlot fed_mean(dataset + ": disclosed mean by federation size",
                      "privacy parameter epsilon", "disclosed mean");
    BandPlot fed_t(dataset + ": disclosed t-statistic by federation size",
                   "privacy parameter epsilon", "disclosed t");
    bool have_fed = false;
    double truth_mean = 0, truth_t = 0, t_crit = 0;
    for (const auto& [key, s] : series) {
      if (key.scenario != scenario_id(Scenario::local)) continue;
      have_fed = true;
      truth_mean = s.truth_mean;
      truth_t = s.truth_t;
      t_crit = s.t_crit;
      fed_mean.add_band(s.eps, s.mean_lo, s.mean_hi,
                        "K=" + std::to_string(key.k));
      fed_t.add_band(s.eps, s.t_lo, s.t_hi, "K=" + std::to_string(key.k));
    }
    if (have_fed) {
      fed_mean.add_hline(truth_mean, "true mean", false);
      fed_mean.write(
          (fs::path(out_dir) / ("fig_" + dataset + "_mean_federated.svg"))
              .string());
      fed_t.add_hline(truth_t, "true t", false);
      fed_t.add_hline(truth_t >= 0 ? t_crit : -t_crit, "critical t", true);
      fed_t.write(
          (fs::path(out_dir) / ("fig_" + dataset + "_tstat_federated.svg"))
              .string());
    }
  }

  for (const auto& [dataset, path] : find_sweeps(in_dir, "sweep_train_")) {
    const auto series = train_series(read_result_csv(path));
    BandPlot plot(dataset + ": DP-SGD test accuracy",
                  "privacy parameter epsilon", "mean test accuracy");
    double base_mean = 0;
    bool any = false;
    for (const auto& [key, s] : series) {
      any = true;
      base_mean = s.base_mean;
      std::string label = scenario_name(scenario_from_int(key.scenario));
      if (key.scenario != scenario_id(Scenario::central))
        label += " K=" + std::to_string(key.k);
      plot.add_line(s.eps, s.acc_mean, label);
    }
    if (any) {
      plot.add_hline(base_mean, "non-private baseline", false);
      plot.write(
          (fs::path(out_dir) / ("fig_" + dataset + "_train_acc.svg"))
              .string());
    }
  }
  (void)alpha;
}

PetGridResult petgrid(const SweepConfig& raw) {
  SweepConfig cfg = raw;
  cfg.desk = true;
  int k = 4;
  for (const int kk : cfg.ks)
    if (kk > 1) {
      k = kk;
      break;
    }
  cfg.ks = {k};
  cfg.scenarios = {Scenario::local, Scenario::secure};
  cfg = finalize(cfg, true);

  const DatasetBundle bundle = load_bundle(cfg);
  PetGridResult res;
  res.cfg = cfg;

  // DP quadrants from a training sweep at the chosen K.
  const TrainSweepResult sweep = sweep_training(cfg);
  res.baseline_accuracy = sweep.base_mean;

  const auto pick_quadrant = [&](Scenario sc, bool secure_flag) {
    PetQuadrant quad;
    quad.secure = secure_flag;
    quad.dp = true;
    std::vector<double> eps, p;
    std::vector<const TrainCell*> cells;
    for (const auto& c : sweep.cells)
      if (c.scenario == sc && c.k == k) {
        eps.push_back(c.eps);
        p.push_back(c.welch_p);
        cells.push_back(&c);
      }
    quad.critical = critical_eps_training(eps, p, cfg.alpha);
    // accuracy at the critical grid point (max grid when above it)
    std::size_t at = eps.size() - 1;
    if (quad.critical.state == CriticalEps::State::value) {
      for (std::size_t i = 0; i < eps.size(); ++i)
        if (eps[i] >= quad.critical.eps - 1e-12) {
          at = i;
          break;
        }
    }
    if (!cells.empty()) {
      quad.accuracy = cells[at]->acc_mean;
      quad.accuracy_se = std::sqrt(
          cells[at]->acc_var / std::max(1, cells[at]->trials -
                                               cells[at]->failures));
    }
    return quad;
  };

  // no-DP quadrants: plain SGD, with and without the masked fixed-point
  // aggregation path.
  const auto plain_quadrant = [&](bool secure_flag) {
    PetQuadrant quad;
    quad.secure = secure_flag;
    quad.dp = false;
    quad.critical.state = CriticalEps::State::not_applicable;
    const int trials = cfg.train_trials;
    std::vector<double> accs(static_cast<std::size_t>(trials));
    TrainConfig tc;
    tc.lr = cfg.lr;
    tc.max_batch = cfg.max_batch;
    tc.epochs = cfg.epochs;
    tc.clip_norm = cfg.clip_norm;
    tc.delta = bundle.schema.delta;
    tc.dp = false;
    tc.plain_secure = secure_flag;
    tc.scenario = secure_flag ? Scenario::secure : Scenario::central;
    const auto parts = partition_rows(
        bundle.train_enc.rows, k, derive_seed(cfg.master_seed, kPartTag,
                                              std::uint64_t(k)));
    for_each_cell_trial(1, trials, cfg.threads, [&](std::size_t, int t) {
      const std::uint64_t seed =
          derive_seed(cfg.master_seed, kTrainTag, std::uint64_t(t));
      const TrainResult r = secure_flag
                                ? train_federated(bundle.train_enc, parts, tc,
                                                  seed)
                                : train(bundle.train_enc, tc, seed);
      accs[std::size_t(t)] = evaluate(r.model, bundle.test_enc);
    });
    double m = 0, v = 0;
    for (const double a : accs) m += a;
    m /= double(trials);
    for (const double a : accs) v += (a - m) * (a - m);
    v /= double(trials - 1);
    quad.accuracy = m;
    quad.accuracy_se = std::sqrt(v / trials);
    return quad;
  };

  res.quadrants.push_back(pick_quadrant(Scenario::secure, true));
  res.quadrants.push_back(plain_quadrant(true));
  res.quadrants.push_back(pick_quadrant(Scenario::local, false));
  res.quadrants.push_back(plain_quadrant(false));
  return res;
}

std::string write_petgrid(const PetGridResult& res) {
  const SweepConfig& cfg = res.cfg;
  fs::create_directories(cfg.out_dir);
  const std::string path =
      (fs::path(cfg.out_dir) / ("petgrid_" + cfg.dataset + ".csv")).string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << "secure_aggregation,differential_privacy,critical_eps,accuracy,"
         "accuracy_se,baseline_accuracy\n";
  for (const auto& q : res.quadrants) {
    out << (q.secure ? "yes" : "no") << ',' << (q.dp ? "yes" : "no") << ','
        << (q.dp ? format_critical(q.critical) : std::string("none")) << ','
        << fmt_double(q.accuracy) << ',' << fmt_double(q.accuracy_se) << ','
        << fmt_double(res.baseline_accuracy) << '\n';
  }
  return path;
}

}  // namespace fedsandbox
