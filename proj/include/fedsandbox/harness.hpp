#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fedsandbox/fed_learn.hpp"
#include "fedsandbox/fed_stats.hpp"
#include "fedsandbox/table.hpp"

namespace fedsandbox {

std::vector<double> log_grid(double lo, double hi, int points);

struct SweepConfig {
  std::string dataset = "heart";
  std::string data_dir;             // empty = $FEDSANDBOX_DATA_DIR or ./data
  std::string schema_dir = "schemas";
  std::string out_dir = "out";
  std::vector<double> eps_grid;     // empty = default grid
  std::vector<int> ks;              // empty = default federation sizes
  std::vector<Scenario> scenarios;  // empty = all three
  int trials = 0;        // 0 = default (10000 stats, 2000 desk)
  int train_trials = 50;
  std::uint64_t master_seed = 1;
  int threads = 0;  // 0 = all available, 1 = serial reference engine
  bool desk = false;
  bool direct_laplace = false;
  std::size_t max_rows = 0;  // 0 = no row cap (brfss desk runs set this)
  double alpha = 0.05;
  int epochs = 500;
  double lr = 0.01;
  int max_batch = 242;
  double clip_norm = 1.0;
  std::string export_model_path;
};

// Fills unset fields with the full-scale or desk-scale defaults.
SweepConfig finalize(SweepConfig cfg, bool training);

// Loaded dataset plus everything the sweeps reuse across cells.
struct DatasetBundle {
  DatasetSchema schema;
  std::string csv_path;
  Table clean;
  SplitSpec split;
  EncodedMatrix train_enc;
  EncodedMatrix test_enc;
  int sel_col = -1;
};

DatasetBundle load_bundle(const SweepConfig& cfg);

struct StatsCell {
  Scenario scenario = Scenario::central;
  int k = 1;
  double eps = 0;
  int trials = 0;
  int failures = 0;
  double mean_lo = 0, mean_hi = 0;
  double var_lo = 0, var_hi = 0;
  double t_lo = 0, t_hi = 0;
  std::size_t var_omitted_per_trial = 0;
  std::size_t var_floored_total = 0;
};

struct StatsSweepResult {
  SweepConfig cfg;
  double truth_mean = 0, truth_var = 0, truth_t = 0, df_plain = 0, t_crit = 0;
  std::vector<StatsCell> cells;
};

StatsSweepResult sweep_tstat(const SweepConfig& cfg);
// Writes sweep_stats_<dataset>.csv plus the .meta sidecar; returns the CSV
// path.
std::string write_stats_outputs(const StatsSweepResult& res);

struct TrainCell {
  Scenario scenario = Scenario::central;
  int k = 1;
  double eps = 0;
  int trials = 0;
  int failures = 0;
  double acc_mean = 0, acc_var = 0;
  double sigma = 0, achieved_eps = 0;
  long long steps = 0;
  double q = 0;
  double welch_p = 1;  // DP accuracies vs the non-private baseline
};

struct TrainSweepResult {
  SweepConfig cfg;
  int base_trials = 0;
  double base_mean = 0, base_var = 0;
  std::vector<TrainCell> cells;
};

TrainSweepResult sweep_training(const SweepConfig& cfg);
std::string write_train_outputs(const TrainSweepResult& res);

// Critical epsilon verdict for one (scenario, K) series.
struct CriticalEps {
  enum class State { value, above_grid, not_applicable };
  State state = State::not_applicable;
  double eps = 0;
};

std::string format_critical(const CriticalEps& c);  // 2 significant digits

// Smallest epsilon whose whole 95% band sits on the significant side of the
// critical t value (sign-aware), log-interpolated between grid points.
CriticalEps critical_eps_tstat(const std::vector<double>& eps_grid,
                               const std::vector<double>& band_lo,
                               const std::vector<double>& band_hi,
                               double truth_t, double df_plain, double alpha);

// Smallest grid epsilon whose Welch test vs baseline stops rejecting and
// stays non-rejecting at every larger grid point.
CriticalEps critical_eps_training(const std::vector<double>& eps_grid,
                                  const std::vector<double>& welch_p,
                                  double alpha);

// Table/figure emission over previously written sweep CSVs.
void emit_tables(const std::string& in_dir, const std::string& out_dir,
                 double alpha = 0.05);
void emit_figures(const std::string& in_dir, const std::string& out_dir,
                  double alpha = 0.05);

// Quantitative PET-combination grid for one dataset (secure aggregation x
// differential privacy), written to petgrid_<dataset>.csv.
struct PetQuadrant {
  bool secure = false;
  bool dp = false;
  CriticalEps critical;
  double accuracy = 0;
  double accuracy_se = 0;
};

struct PetGridResult {
  SweepConfig cfg;
  double baseline_accuracy = 0;
  std::vector<PetQuadrant> quadrants;
};

PetGridResult petgrid(const SweepConfig& cfg);
std::string write_petgrid(const PetGridResult& res);

// Trial engine shared by the sweeps and the benchmark: OpenMP-parallel when
// threads != 1, plain serial reference loop when threads == 1. Results must
// be written into preallocated per-(cell, trial) slots so both engines
// produce identical output.
void for_each_cell_trial(std::size_t cells, int trials, int threads,
                         const std::function<void(std::size_t, int)>& fn);

}  // namespace fedsandbox
