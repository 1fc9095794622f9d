#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace fedsandbox {

// Philox4x32-10 block permutation. Counter-based, pure integer arithmetic,
// so streams are identical on every platform and every thread schedule.
struct Philox4x32 {
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t(kMul0) * ctr[0];
      const std::uint64_t p1 = std::uint64_t(kMul1) * ctr[2];
      const auto hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
      const auto hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }
};

// SplitMix64 finalizer; the building block for seed derivation.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Splittable counter hash: folds any number of indices (cell, trial, step,
// row, ...) into one 64-bit seed. Order-sensitive, collision-resistant
// enough for simulation streams, and independent of evaluation order.
constexpr std::uint64_t derive_seed(std::uint64_t root) { return mix64(root); }

template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t next,
                                    Rest... rest) {
  return derive_seed(mix64(root ^ (next + 0x9E3779B97F4A7C15ull)), rest...);
}

// Maps a 64-bit hash to [0,1); used for per-row Poisson sampling decisions.
constexpr double unit_from_hash(std::uint64_t h) {
  return double(h >> 11) * 0x1.0p-53;
}

// Deterministic stream generator over the Philox permutation. Each consumer
// owns its own Rng; there is no shared state anywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed)
      : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)} {}

  std::uint64_t next_u64() {
    if (pos_ >= 4) refill();
    const std::uint64_t lo = buf_[pos_], hi = buf_[pos_ + 1];
    pos_ += 2;
    return (hi << 32) | lo;
  }

  std::array<std::uint32_t, 4> raw_block(std::uint64_t block_index) const {
    return Philox4x32::block(
        {std::uint32_t(block_index), std::uint32_t(block_index >> 32), 0, 0},
        key_);
  }

  // [0, 1)
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // (0, 1]
  double uniform01_pos() {
    return double((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform01_pos();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(a);
    have_cached_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Laplace(0, scale) via inverse CDF.
  double laplace(double scale) {
    const double u = (double(next_u64() >> 11) + 0.5) * 0x1.0p-53 - 0.5;
    const double mag = -scale * std::log(1.0 - 2.0 * std::abs(u));
    return u < 0 ? -mag : mag;
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection-free would bias for huge n; n here is row counts, so the
    // modulo bias of a 64-bit draw is negligible, but reject anyway.
    const std::uint64_t limit = n * ((~std::uint64_t(0)) / n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

 private:
  void refill() {
    const auto words = Philox4x32::block(ctr_, key_);
    for (int i = 0; i < 4; ++i) buf_[i] = words[i];
    pos_ = 0;
    if (++ctr_[0] == 0 && ++ctr_[1] == 0 && ++ctr_[2] == 0) ++ctr_[3];
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> ctr_{{0, 0, 0, 0}};
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
  bool have_cached_ = false;
  double cached_ = 0.0;
};

// Fisher-Yates shuffle driven by a named Rng stream.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = std::size_t(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace fedsandbox
