// fedsandbox: simulate federated statistics and DP-SGD training under
// central DP, local DP, and secure aggregation with global DP, sweeping the
// privacy parameter to locate critical epsilon values.

#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedsandbox/error.hpp"
#include "fedsandbox/harness.hpp"
#include "fedsandbox/synth.hpp"

namespace {

using namespace fedsandbox;

std::vector<Scenario> parse_scenarios(const std::string& arg) {
  std::vector<Scenario> out;
  std::string cur;
  const auto flush = [&] {
    if (cur.empty()) return;
    if (cur == "1" || cur == "central")
      out.push_back(Scenario::central);
    else if (cur == "2" || cur == "local")
      out.push_back(Scenario::local);
    else if (cur == "3" || cur == "secure")
      out.push_back(Scenario::secure);
    else
      throw CLI::ValidationError("--scenario",
                                 "expected central|local|secure or 1|2|3");
    cur.clear();
  };
  for (const char c : arg) {
    if (c == ',')
      flush();
    else
      cur += c;
  }
  flush();
  return out;
}

std::vector<double> parse_grid(const std::string& arg) {
  // lo:hi:points
  double lo = 0, hi = 0;
  int points = 0;
  if (std::sscanf(arg.c_str(), "%lf:%lf:%d", &lo, &hi, &points) != 3)
    throw CLI::ValidationError("--eps", "expected lo:hi:points");
  return log_grid(lo, hi, points);
}

void add_common(CLI::App* cmd, SweepConfig& cfg, std::string& scenario_arg,
                std::string& eps_arg) {
  cmd->add_option("--dataset", cfg.dataset,
                  "dataset: heart, framingham, adult or brfss");
  cmd->add_option("--scenario", scenario_arg,
                  "comma list of central,local,secure (default all)");
  cmd->add_option("--k", cfg.ks, "federation sizes (default 1,2,...,64)")
      ->delimiter(',');
  cmd->add_option("--eps", eps_arg, "epsilon grid as lo:hi:points");
  cmd->add_option("--seed", cfg.master_seed, "master seed");
  cmd->add_option("--out", cfg.out_dir, "output directory");
  cmd->add_option("--data-dir", cfg.data_dir,
                  "dataset cache (default $FEDSANDBOX_DATA_DIR or ./data)");
  cmd->add_option("--schemas", cfg.schema_dir, "schema directory");
  cmd->add_option("--threads", cfg.threads,
                  "worker threads (1 = serial reference engine)");
  cmd->add_option("--rows", cfg.max_rows,
                  "subsample the clean table to this many rows (0 = all)");
  cmd->add_flag("--desk", cfg.desk, "desk-scale grid and trial counts");
}

int run(int argc, char** argv) {
  CLI::App app{"federated privacy sandbox simulator"};
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand(
      "prepare", "fetch/clean one dataset and print its summary");
  std::string prep_dataset;
  SweepConfig prep_cfg;
  prepare->add_option("dataset", prep_dataset, "dataset name")->required();
  prepare->add_option("--data-dir", prep_cfg.data_dir, "dataset cache");
  prepare->add_option("--schemas", prep_cfg.schema_dir, "schema directory");
  prepare->add_option("--rows", prep_cfg.max_rows, "subsample cap");
  prepare->add_option("--seed", prep_cfg.master_seed, "master seed");

  // sweep-stats
  SweepConfig stats_cfg;
  std::string stats_scen, stats_eps;
  auto* sweep_stats = app.add_subcommand(
      "sweep-stats", "epsilon sweep of the disclosed Welch t statistic");
  add_common(sweep_stats, stats_cfg, stats_scen, stats_eps);
  sweep_stats->add_option("--trials", stats_cfg.trials,
                          "draws per cell (default 10000, desk 2000)");
  sweep_stats->add_flag("--tstat-direct-laplace", stats_cfg.direct_laplace,
                        "release the clipped t statistic via Laplace instead "
                        "of the combined mechanism");

  // sweep-train
  SweepConfig train_cfg;
  std::string train_scen, train_eps;
  auto* sweep_train = app.add_subcommand(
      "sweep-train", "epsilon sweep of DP-SGD test accuracy");
  add_common(sweep_train, train_cfg, train_scen, train_eps);
  sweep_train->add_option("--trials", train_cfg.train_trials,
                          "trainings per cell (>= 50)");
  sweep_train->add_option("--epochs", train_cfg.epochs, "training epochs");
  sweep_train->add_option("--export-model", train_cfg.export_model_path,
                          "write one trained model (feature value per line)");

  // tables / figures
  std::string in_dir = "out", out_dir = "out";
  double alpha = 0.05;
  auto* tables = app.add_subcommand(
      "tables", "assemble critical-epsilon tables from sweep outputs");
  tables->add_option("--in", in_dir, "directory with sweep_*.csv");
  tables->add_option("--out", out_dir, "output directory");
  tables->add_option("--alpha", alpha, "significance level");
  auto* figures = app.add_subcommand(
      "figures", "render SVG band plots from sweep outputs");
  figures->add_option("--in", in_dir, "directory with sweep_*.csv");
  figures->add_option("--out", out_dir, "output directory");

  // petgrid
  SweepConfig pet_cfg;
  std::string pet_scen, pet_eps;
  auto* pet = app.add_subcommand(
      "petgrid", "measure the PET-combination grid for one dataset");
  add_common(pet, pet_cfg, pet_scen, pet_eps);
  pet->add_option("--trials", pet_cfg.train_trials, "trainings per cell");

  CLI11_PARSE(app, argc, argv);

  if (prepare->parsed()) {
    prep_cfg.dataset = prep_dataset;
    const DatasetBundle b = load_bundle(prep_cfg);
    const auto ranked = rank_features(b.clean);
    std::printf("dataset: %s\n", b.schema.name.c_str());
    std::printf("file: %s\n", b.csv_path.c_str());
    std::printf("columns: %zu (attributes: %zu)\n", b.clean.columns.size(),
                b.clean.columns.size() - 1);
    std::printf("clean rows: %zu (dropped %zu missing, %zu duplicates)\n",
                b.clean.rows, b.clean.dropped_missing,
                b.clean.dropped_duplicates);
    std::printf("train rows: %zu, test rows: %zu (balanced)\n",
                b.split.train.rows, b.split.test.rows);
    std::printf("selected column: %s\n",
                b.clean.columns[std::size_t(b.sel_col)].name.c_str());
    std::printf("top effects:");
    for (std::size_t i = 0; i < ranked.size() && i < 5; ++i)
      std::printf(" %s=%.3f", ranked[i].column.c_str(), ranked[i].effect);
    std::printf("\n");
    return 0;
  }
  if (sweep_stats->parsed()) {
    if (!stats_scen.empty()) stats_cfg.scenarios = parse_scenarios(stats_scen);
    if (!stats_eps.empty()) stats_cfg.eps_grid = parse_grid(stats_eps);
    const auto res = sweep_tstat(stats_cfg);
    const std::string path = write_stats_outputs(res);
    std::printf("wrote %s (%zu cells, t=%.4f, t_crit=%.4f)\n", path.c_str(),
                res.cells.size(), res.truth_t, res.t_crit);
    return 0;
  }
  if (sweep_train->parsed()) {
    if (!train_scen.empty()) train_cfg.scenarios = parse_scenarios(train_scen);
    if (!train_eps.empty()) train_cfg.eps_grid = parse_grid(train_eps);
    const auto res = sweep_training(train_cfg);
    const std::string path = write_train_outputs(res);
    std::printf("wrote %s (%zu cells, baseline accuracy %.4f)\n", path.c_str(),
                res.cells.size(), res.base_mean);
    return 0;
  }
  if (tables->parsed()) {
    emit_tables(in_dir, out_dir, alpha);
    std::printf("wrote %s/dp_stats.csv and %s/dp_train.csv\n", out_dir.c_str(),
                out_dir.c_str());
    return 0;
  }
  if (figures->parsed()) {
    emit_figures(in_dir, out_dir);
    std::printf("wrote figures to %s\n", out_dir.c_str());
    return 0;
  }
  if (pet->parsed()) {
    if (!pet_scen.empty()) pet_cfg.scenarios = parse_scenarios(pet_scen);
    if (!pet_eps.empty()) pet_cfg.eps_grid = parse_grid(pet_eps);
    const auto res = petgrid(pet_cfg);
    const std::string path = write_petgrid(res);
    std::printf("wrote %s (baseline accuracy %.4f)\n", path.c_str(),
                res.baseline_accuracy);
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const fedsandbox::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "unexpected error: %s\n", e.what());
    return 2;
  }
}
