#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedsandbox/fed_stats.hpp"
#include "fedsandbox/table.hpp"

namespace fedsandbox {

struct Model {
  std::vector<double> weights;
  double bias = 0.0;
};

struct TrainConfig {
  double lr = 0.01;
  int max_batch = 242;
  int epochs = 500;
  double clip_norm = 1.0;
  double target_eps = 1.0;
  double delta = 1e-5;
  Scenario scenario = Scenario::central;
  // false = the non-private reference: the same clipped loop with zero
  // noise (set clip_norm large for fully plain SGD).
  bool dp = true;
  // Non-private training routed through the masked fixed-point aggregation
  // anyway (the "secure aggregation, no noise injection" quadrant).
  bool plain_secure = false;
  // Noise multiplier to use instead of calibrating (sweeps calibrate once
  // per cell); <= 0 means calibrate inside train().
  double sigma_override = 0.0;
  int fractional_bits = 16;
  double secure_clip = 1e4;  // fixed-point clip for aggregated gradient sums
  std::uint64_t secure_root_secret = 0xFED5EC;
};

// Per-example gradient of the binary cross-entropy loss with sigmoid link;
// the last coordinate is the bias gradient.
std::vector<double> grad_logloss(const Model& m, std::span<const double> x,
                                 int y);

struct TrainResult {
  Model model;
  double achieved_eps = 0.0;  // +inf for non-private runs
  double sigma = 0.0;         // noise multiplier actually used (max over nodes)
  long long steps = 0;
  double q = 1.0;  // Poisson sampling rate
  std::size_t small_shard_warnings = 0;
  std::size_t clip_events = 0;  // fixed-point clipping in the secure path
};

// Centralized training (scenario 1 when cfg.dp, plain baseline otherwise).
TrainResult train(const EncodedMatrix& data, const TrainConfig& cfg,
                  std::uint64_t seed);

// Federated training over a row partition; cfg.scenario picks plaintext
// local-DP sharing (local) or masked fixed-point aggregation with split
// noise (secure).
TrainResult train_federated(
    const EncodedMatrix& data,
    const std::vector<std::vector<std::uint32_t>>& node_rows,
    const TrainConfig& cfg, std::uint64_t seed);

// Fraction of correct predictions at the 0.5 threshold.
double evaluate(const Model& m, const EncodedMatrix& test);

// Plain-text export: one `feature value` line per coefficient plus the bias.
void export_model(const Model& m, const std::vector<std::string>& names,
                  const std::string& path);

// Round-robin partition of 0..rows-1 used by the sweeps; sizes differ by at
// most one and row ids stay global so Poisson draws agree across scenarios.
std::vector<std::vector<std::uint32_t>> partition_rows(std::size_t rows, int k,
                                                       std::uint64_t seed);

}  // namespace fedsandbox
