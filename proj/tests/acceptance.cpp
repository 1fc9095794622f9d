// Acceptance suite: one line of output per criterion, nonzero exit when any
// fails. Heavier than the unit tests; expected wall time is a few minutes.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "fedsandbox/error.hpp"
#include "fedsandbox/fed_learn.hpp"
#include "fedsandbox/fed_stats.hpp"
#include "fedsandbox/harness.hpp"
#include "fedsandbox/rdp.hpp"
#include "fedsandbox/rng.hpp"
#include "fedsandbox/secure_agg.hpp"
#include "fedsandbox/stats_math.hpp"
#include "fedsandbox/synth.hpp"
#include "quadrature_oracle.hpp"

using namespace fedsandbox;

namespace {

std::string g_schemas = std::string(FEDSANDBOX_SOURCE_DIR) + "/schemas";
std::string g_data = "acceptance_data_cache";

SweepConfig base_config() {
  SweepConfig cfg;
  cfg.dataset = "heart";
  cfg.data_dir = g_data;
  cfg.schema_dir = g_schemas;
  return cfg;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

// ---- criterion 1: mask cancellation ---------------------------------------

bool mask_cancellation(std::string& detail) {
  const std::size_t dim = 128;
  Rng rng(20240601);
  for (const int k : {1, 2, 4, 8, 16, 32, 64}) {
    FixedPointCodec codec;
    codec.clip = 64.0;
    codec.check_headroom(k);
    const int rounds = std::max(1, 100 / k);
    for (int round = 0; round < rounds; ++round) {
      std::vector<std::vector<double>> plain(static_cast<std::size_t>(k));
      std::vector<std::uint64_t> expected_mod(dim, 0);
      std::vector<double> expected_real(dim, 0.0);
      const auto seeds =
          PairwiseSeeds::derive(0xACCE97, k, std::uint64_t(round));
      std::vector<MaskedVector> shares;
      for (int node = 0; node < k; ++node) {
        auto& v = plain[std::size_t(node)];
        v.resize(dim);
        for (auto& x : v) x = (rng.uniform01() * 2.0 - 1.0) * 32.0;
        const auto enc = codec.encode(v);
        for (std::size_t i = 0; i < dim; ++i) {
          expected_mod[i] += enc[i];
          expected_real[i] += v[i];
        }
        shares.push_back(mask(enc, node, seeds));
      }
      const auto mod_sum = aggregate_modular(shares, k);
      if (mod_sum != expected_mod) {
        detail = "modular sum mismatch at K=" + std::to_string(k);
        return false;
      }
      const auto decoded = codec.decode(mod_sum);
      const double tol = double(k) * std::pow(2.0, -16);
      for (std::size_t i = 0; i < dim; ++i) {
        if (std::abs(decoded[i] - expected_real[i]) > tol) {
          detail = "decode error beyond K*2^-16 at K=" + std::to_string(k);
          return false;
        }
      }
    }
  }
  detail = "K in {1..64}, exact modular equality, decode within K*2^-16";
  return true;
}

// ---- criterion 2: log-normal mechanism ------------------------------------

bool lognormal_mechanism(std::string& detail) {
  const double unit = gaussian_sigma({1.0, 1e-5, 1.0});
  std::ostringstream ss;
  for (const double sigma : {0.1, 0.5, 1.0}) {
    const PrivacyParams p{1.0, 1e-5, sigma / unit};
    Rng rng(derive_seed(777, std::uint64_t(sigma * 1000)));
    const int n = 1000000;
    double sum = 0;
    for (int i = 0; i < n; ++i) {
      const double v = lognormal_variance(1.0, p, rng);
      if (!(v > 0.0)) {
        detail = "nonpositive release at sigma=" + std::to_string(sigma);
        return false;
      }
      sum += v;
    }
    const double mean = sum / n;
    if (std::abs(mean - 1.0) > 0.01) {
      detail = "mean off by " + std::to_string(std::abs(mean - 1.0)) +
               " at sigma=" + std::to_string(sigma);
      return false;
    }
    ss << " sigma=" << sigma << " mean=" << mean;
  }
  detail = "10^6 draws all positive, means within 1%:" + ss.str();
  return true;
}

// ---- criterion 3: scenario 1 vs 3 KS equivalence --------------------------

bool scenario_equivalence(std::string& detail) {
  SweepConfig cfg = base_config();
  const DatasetBundle bundle = load_bundle(cfg);
  Shards single;
  single.node_tables.push_back(bundle.clean);
  const auto pre1 = precompute_stats(single, bundle.sel_col);
  std::ostringstream ss;
  for (const int k : {4, 64}) {
    const auto pre3 = precompute_stats(
        shard(bundle.clean, k, derive_seed(3, std::uint64_t(k))),
        bundle.sel_col);
    for (const double eps : {0.5, 5.0, 50.0}) {
      // the KS test falsely rejects 1% of seedings by construction; this
      // fixed base was checked against the null at 20000 draws
      std::vector<double> t1, t3;
      t1.reserve(2000);
      t3.reserve(2000);
      for (int i = 0; i < 2000; ++i) {
        Rng ra(derive_seed(911, std::uint64_t(k), std::uint64_t(eps * 100),
                           std::uint64_t(i)));
        Rng rb(derive_seed(912, std::uint64_t(k), std::uint64_t(eps * 100),
                           std::uint64_t(i)));
        t1.push_back(
            trial_scenario1(pre1, {eps, bundle.schema.delta, 0.0}, ra).t);
        t3.push_back(
            trial_scenario3(pre3, {eps, bundle.schema.delta, 0.0}, rb).t);
      }
      const auto ks = ks_two_sample(t1, t3);
      if (ks.p_value <= 0.01) {
        detail = "KS rejected at K=" + std::to_string(k) +
                 " eps=" + std::to_string(eps) +
                 " (p=" + std::to_string(ks.p_value) + ")";
        return false;
      }
      ss << " (K=" << k << ",eps=" << eps << ",p=" << std::fixed
         << std::setprecision(2) << ks.p_value << ")" << std::defaultfloat;
    }
  }
  detail = "2000-draw KS keeps the null at alpha=0.01:" + ss.str();
  return true;
}

// ---- criterion 4: order-of-magnitude gap at K=64 ---------------------------

bool order_of_magnitude(std::string& detail) {
  SweepConfig cfg = base_config();
  cfg.desk = true;          // 9-point grid
  cfg.trials = 2000;
  cfg.ks = {64};
  cfg.scenarios = {Scenario::local, Scenario::secure};
  cfg.out_dir = "acceptance_out_c4";
  const auto res = sweep_tstat(cfg);

  std::vector<double> eps, lo2, hi2, lo3, hi3;
  for (const auto& cell : res.cells) {
    if (cell.k != 64) continue;
    if (cell.scenario == Scenario::local) {
      eps.push_back(cell.eps);
      lo2.push_back(cell.t_lo);
      hi2.push_back(cell.t_hi);
    } else if (cell.scenario == Scenario::secure) {
      lo3.push_back(cell.t_lo);
      hi3.push_back(cell.t_hi);
    }
  }
  const auto c2 =
      critical_eps_tstat(eps, lo2, hi2, res.truth_t, res.df_plain, cfg.alpha);
  const auto c3 =
      critical_eps_tstat(eps, lo3, hi3, res.truth_t, res.df_plain, cfg.alpha);
  if (c3.state != CriticalEps::State::value) {
    detail = "secure scenario has no finite critical epsilon (" +
             format_critical(c3) + ")";
    return false;
  }
  if (c2.state == CriticalEps::State::value) {
    detail = "critical eps: local=" + format_critical(c2) +
             " secure=" + format_critical(c3);
    return c2.eps >= 10.0 * c3.eps;
  }
  // local never qualified on the grid: critical > 100, so the factor holds
  // whenever 10 * secure fits under the grid ceiling
  detail = "critical eps: local>100, secure=" + format_critical(c3);
  return 10.0 * c3.eps <= 100.0;
}

// ---- criterion 5: federated-learning equivalence ---------------------------

bool fl_equivalence(std::string& detail) {
  SweepConfig cfg = base_config();
  const DatasetBundle bundle = load_bundle(cfg);
  // 5 grid points over the calibratable span (the fixed order grid cannot
  // reach eps below ~0.05 at this sampling rate and step count)
  const auto grid = log_grid(0.1, 100.0, 5);
  const int trials = 50;

  TrainConfig base;
  base.delta = bundle.schema.delta;

  const long long steps =
      ((long long)(bundle.train_enc.rows) + base.max_batch - 1) /
      base.max_batch * base.epochs;
  const double q =
      std::min(1.0, double(base.max_batch) / double(bundle.train_enc.rows));

  std::ostringstream ss;
  for (const double eps : grid) {
    const double sigma = calibrate_sigma(eps, base.delta, q, steps);
    // central accuracies
    std::vector<double> acc1(trials);
    for_each_cell_trial(1, trials, 0, [&](std::size_t, int t) {
      TrainConfig tc = base;
      tc.target_eps = eps;
      tc.sigma_override = sigma;
      const auto r = train(bundle.train_enc, tc,
                           derive_seed(51, std::uint64_t(eps * 1000),
                                       std::uint64_t(t)));
      acc1[std::size_t(t)] = evaluate(r.model, bundle.test_enc);
    });
    double m1 = 0, v1 = 0;
    for (const double a : acc1) m1 += a;
    m1 /= trials;
    for (const double a : acc1) v1 += (a - m1) * (a - m1);
    v1 /= (trials - 1);

    for (const int k : {4, 16}) {
      const auto parts = partition_rows(bundle.train_enc.rows, k,
                                        derive_seed(52, std::uint64_t(k)));
      std::vector<double> acc3(trials);
      for_each_cell_trial(1, trials, 0, [&](std::size_t, int t) {
        TrainConfig tc = base;
        tc.target_eps = eps;
        tc.sigma_override = sigma;
        tc.scenario = Scenario::secure;
        const auto r = train_federated(bundle.train_enc, parts, tc,
                                       derive_seed(51, std::uint64_t(eps * 1000),
                                                   std::uint64_t(t)));
        acc3[std::size_t(t)] = evaluate(r.model, bundle.test_enc);
      });
      double m3 = 0, v3 = 0;
      for (const double a : acc3) m3 += a;
      m3 /= trials;
      for (const double a : acc3) v3 += (a - m3) * (a - m3);
      v3 /= (trials - 1);
      const double pooled_se = std::sqrt(v1 / trials + v3 / trials);
      const double gap = std::abs(m1 - m3);
      if (gap >= 2.0 * pooled_se + 1e-9) {
        detail = "gap " + std::to_string(gap) + " > 2 SE at K=" +
                 std::to_string(k) + " eps=" + std::to_string(eps);
        return false;
      }
    }
    ss << " " << eps;
  }
  detail = "secure matches central within 2 pooled SE at eps:" + ss.str() +
           " for K in {4,16}";
  return true;
}

// ---- criterion 6: local-DP degradation (training) --------------------------

bool local_dp_degradation(std::string& detail) {
  std::ostringstream ss;
  for (const std::string dataset : {"heart", "framingham"}) {
    SweepConfig cfg = base_config();
    cfg.dataset = dataset;
    cfg.desk = true;
    // quarter-decade grid over the calibratable span: the ordering claim
    // needs enough resolution to separate the two critical epsilons
    cfg.eps_grid = log_grid(0.1, 100.0, 13);
    cfg.ks = {16};
    cfg.scenarios = {Scenario::central, Scenario::local};
    cfg.out_dir = "acceptance_out_c6";
    const auto res = sweep_training(cfg);

    std::vector<double> eps1, p1, eps2, p2;
    for (const auto& cell : res.cells) {
      if (cell.scenario == Scenario::central) {
        eps1.push_back(cell.eps);
        p1.push_back(cell.welch_p);
      } else if (cell.scenario == Scenario::local && cell.k == 16) {
        eps2.push_back(cell.eps);
        p2.push_back(cell.welch_p);
      }
    }
    const auto c1 = critical_eps_training(eps1, p1, cfg.alpha);
    const auto c2 = critical_eps_training(eps2, p2, cfg.alpha);
    if (c1.state != CriticalEps::State::value) {
      detail = dataset + ": central critical epsilon not finite (" +
               format_critical(c1) + ")";
      return false;
    }
    const bool greater =
        c2.state == CriticalEps::State::above_grid ||
        (c2.state == CriticalEps::State::value && c2.eps > c1.eps);
    if (!greater) {
      detail = dataset + ": local@16=" + format_critical(c2) +
               " not greater than central=" + format_critical(c1);
      return false;
    }
    ss << " " << dataset << ": central=" << format_critical(c1)
       << " local@16=" << format_critical(c2);
  }
  detail = "strict ordering holds:" + ss.str();
  return true;
}

// ---- criterion 7: accountant oracle ----------------------------------------

bool accountant_oracle(std::string& detail) {
  // unsubsampled closed form is exact
  for (const double sigma : {0.5, 1.0, 4.0})
    for (const int alpha : {2, 8, 32}) {
      const double v = rdp_subsampled_gaussian(1.0, sigma, alpha);
      if (v != double(alpha) / (2.0 * sigma * sigma)) {
        detail = "q=1 closed form violated";
        return false;
      }
    }
  Rng rng(707);
  double worst = 0;
  for (int i = 0; i < 20; ++i) {
    const double q = 0.01 + 0.49 * rng.uniform01();
    const double sigma = 0.8 + 4.2 * rng.uniform01();
    const int alpha = 2 + int(rng.below(31));
    const double impl = rdp_subsampled_gaussian(q, sigma, alpha);
    const double quad = rdp_quadrature_oracle(q, sigma, alpha);
    const double rel = std::abs(impl - quad) / std::max(quad, 1e-300);
    worst = std::max(worst, rel);
    if (rel > 0.01) {
      detail = "relative error " + std::to_string(rel) + " at q=" +
               std::to_string(q) + " sigma=" + std::to_string(sigma) +
               " alpha=" + std::to_string(alpha);
      return false;
    }
  }
  std::ostringstream ss;
  ss << "20 random tuples within 1% of quadrature (worst " << worst
     << "); q=1 exact";
  detail = ss.str();
  return true;
}

// ---- criterion 8: gradient finite differences -------------------------------

bool gradient_check(std::string& detail) {
  Rng rng(808);
  const double h = 1e-6;
  double worst = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t dim = 1 + rng.below(10);
    Model m;
    for (std::size_t j = 0; j < dim; ++j)
      m.weights.push_back(rng.normal() * 0.7);
    m.bias = rng.normal() * 0.3;
    std::vector<double> x(dim);
    for (auto& v : x) v = rng.normal();
    const int y = rng.uniform01() < 0.5 ? 0 : 1;
    const auto loss = [&](const Model& model) {
      double z = model.bias;
      for (std::size_t j = 0; j < dim; ++j) z += model.weights[j] * x[j];
      const double s = 1.0 / (1.0 + std::exp(-z));
      return -(y * std::log(s) + (1 - y) * std::log(1 - s));
    };
    const auto g = grad_logloss(m, x, y);
    for (std::size_t j = 0; j <= dim; ++j) {
      Model up = m, dn = m;
      (j < dim ? up.weights[j] : up.bias) += h;
      (j < dim ? dn.weights[j] : dn.bias) -= h;
      const double fd = (loss(up) - loss(dn)) / (2 * h);
      const double rel =
          std::abs(g[j] - fd) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, rel);
      if (rel > 1e-4) {
        detail = "relative error " + std::to_string(rel);
        return false;
      }
    }
  }
  std::ostringstream ss;
  ss << "100 random points within 1e-4 of finite differences (worst " << worst
     << ")";
  detail = ss.str();
  return true;
}

// ---- criterion 9: CLI determinism across worker counts ---------------------

bool cli_determinism(std::string& detail) {
  namespace fs = std::filesystem;
  const std::string cli = FEDSANDBOX_CLI_PATH;
  const auto run = [&](const std::string& out, int threads) {
    fs::remove_all(out);
    std::ostringstream cmd;
    cmd << "FEDSANDBOX_DATA_DIR=" << g_data << " " << cli
        << " sweep-stats --dataset heart --eps 0.1:10:3 --k 1,4 --trials 100"
        << " --seed 7 --threads " << threads << " --schemas " << g_schemas
        << " --out " << out << " > /dev/null 2>&1";
    return std::system(cmd.str().c_str());
  };
  if (run("acceptance_det_a", 1) != 0) {
    detail = "CLI run with 1 worker failed";
    return false;
  }
  if (run("acceptance_det_b", 8) != 0) {
    detail = "CLI run with 8 workers failed";
    return false;
  }
  const auto slurp = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string a = slurp("acceptance_det_a/sweep_stats_heart.csv");
  const std::string b = slurp("acceptance_det_b/sweep_stats_heart.csv");
  if (a.empty() || a != b) {
    detail = "CSV outputs differ between 1 and 8 workers";
    return false;
  }
  detail = "byte-identical sweep_stats_heart.csv with 1 vs 8 workers";
  return true;
}

struct Criterion {
  int id;
  const char* name;
  std::function<bool(std::string&)> run;
};

}  // namespace

int main() {
  // warm the dataset cache once so per-criterion timings stay honest
  ensure_dataset_csv("heart", g_data);
  ensure_dataset_csv("framingham", g_data);

  const std::vector<Criterion> criteria{
      {1, "mask cancellation", mask_cancellation},
      {2, "log-normal mechanism", lognormal_mechanism},
      {3, "scenario 1 vs 3 equivalence (stats)", scenario_equivalence},
      {4, "order-of-magnitude gap at K=64", order_of_magnitude},
      {5, "federated-learning equivalence", fl_equivalence},
      {6, "local-DP degradation (training)", local_dp_degradation},
      {7, "accountant vs quadrature oracle", accountant_oracle},
      {8, "gradient finite-difference check", gradient_check},
      {9, "sweep determinism across workers", cli_determinism},
  };

  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    std::string detail;
    bool ok = false;
    try {
      ok = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs = seconds_since(t0);
    std::printf("[%s] criterion %d: %s (%.1fs) %s\n", ok ? "PASS" : "FAIL",
                c.id, c.name, secs, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
  if (failures > 0)
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  else
    std::printf("all %zu criteria passed\n", criteria.size());
  return failures;
}
