// Benchmark: serial reference engine vs the OpenMP engine on a desk-scale
// t-statistic sweep, with a bitwise equality check between the two runs.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fedsandbox/harness.hpp"

using namespace fedsandbox;

namespace {

double now_seconds() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch())
      .count();
}

bool cells_equal(const StatsSweepResult& a, const StatsSweepResult& b) {
  if (a.cells.size() != b.cells.size()) return false;
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    const auto& x = a.cells[i];
    const auto& y = b.cells[i];
    if (std::memcmp(&x.t_lo, &y.t_lo, sizeof(double)) != 0 ||
        std::memcmp(&x.t_hi, &y.t_hi, sizeof(double)) != 0 ||
        std::memcmp(&x.mean_lo, &y.mean_lo, sizeof(double)) != 0 ||
        std::memcmp(&x.var_hi, &y.var_hi, sizeof(double)) != 0 ||
        x.failures != y.failures)
      return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  SweepConfig cfg;
  cfg.dataset = argc > 1 ? argv[1] : "heart";
  cfg.desk = true;
  cfg.trials = argc > 2 ? std::atoi(argv[2]) : 2000;
  cfg.out_dir = "bench_out";
  cfg.data_dir = argc > 3 ? argv[3] : "";
  cfg.schema_dir = argc > 4 ? argv[4] : "schemas";

  std::printf("benchmark: sweep-stats %s, desk grid, %d trials/cell\n",
              cfg.dataset.c_str(), cfg.trials);

  cfg.threads = 1;
  double t0 = now_seconds();
  const auto serial = sweep_tstat(cfg);
  const double serial_s = now_seconds() - t0;
  std::printf("  serial reference: %8.2f s (%zu cells)\n", serial_s,
              serial.cells.size());

#ifdef _OPENMP
  const int max_threads = omp_get_max_threads();
#else
  const int max_threads = 1;
#endif
  for (int threads = 2; threads <= max_threads; threads *= 2) {
    cfg.threads = threads;
    t0 = now_seconds();
    const auto parallel = sweep_tstat(cfg);
    const double par_s = now_seconds() - t0;
    std::printf("  openmp x%-2d      : %8.2f s  speedup %.2fx  bitwise %s\n",
                threads, par_s, serial_s / par_s,
                cells_equal(serial, parallel) ? "EQUAL" : "DIFFERENT");
    if (!cells_equal(serial, parallel)) return 1;
  }
  return 0;
}
