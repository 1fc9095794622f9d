#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace fedsandbox {

// Fixed-point encoding of bounded reals into Z_{2^64}, two's-complement
// convention for negatives. With K parties summing, decode error stays
// within K * 2^-fractional_bits per element as long as the headroom check
// holds.
struct FixedPointCodec {
  int fractional_bits = 16;
  double clip = 1.0;  // symmetric clip range [-clip, clip]

  double scale() const { return double(std::uint64_t(1) << fractional_bits); }

  // Throws ConfigError when K summands could wrap the 2^63 headroom.
  void check_headroom(int k) const;

  std::uint64_t encode_value(double x, std::size_t* clip_events = nullptr) const;
  double decode_value(std::uint64_t v) const;

  std::vector<std::uint64_t> encode(std::span<const double> x,
                                    std::size_t* clip_events = nullptr) const;
  std::vector<double> decode(std::span<const std::uint64_t> v) const;
};

// Per-round pairwise 128-bit seeds, derived from a shared root secret.
// Stand-in for a key agreement: the derivation is deterministic in the
// simulator but everything downstream only sees the PairwiseSeeds
// interface.
class PairwiseSeeds {
 public:
  static PairwiseSeeds derive(std::uint64_t root_secret, int k,
                              std::uint64_t round_id);

  int nodes() const { return k_; }
  std::uint64_t round() const { return round_id_; }
  // Seed for the ordered pair i < j; both endpoints see the same value.
  const std::array<std::uint32_t, 4>& seed(int i, int j) const;

 private:
  int k_ = 0;
  std::uint64_t round_id_ = 0;
  std::vector<std::array<std::uint32_t, 4>> seeds_;
};

struct MaskedVector {
  int node_id = 0;
  std::uint64_t round_id = 0;
  std::vector<std::uint64_t> payload;
};

// Counter-mode expansion of a 128-bit seed into uniform 64-bit words.
void prg_expand(const std::array<std::uint32_t, 4>& seed,
                std::span<std::uint64_t> out);

// payload = v + sum_{j>i} PRG(seed(i,j)) - sum_{j<i} PRG(seed(j,i)) mod 2^64.
MaskedVector mask(std::span<const std::uint64_t> encoded, int node,
                  const PairwiseSeeds& seeds);

// Modular sum of payloads; requires exactly one share from each of the
// expected_k nodes, all of the same round. Masks cancel exactly, leaving
// the sum of the encoded inputs.
std::vector<std::uint64_t> aggregate_modular(
    const std::vector<MaskedVector>& shares, int expected_k);

// aggregate_modular + fixed-point decode.
std::vector<double> aggregate(const std::vector<MaskedVector>& shares,
                              int expected_k, const FixedPointCodec& codec);

}  // namespace fedsandbox
