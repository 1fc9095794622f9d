#include "fedsandbox/secure_agg.hpp"

#include <algorithm>
#include <cmath>

#include "fedsandbox/error.hpp"
#include "fedsandbox/rng.hpp"

namespace fedsandbox {

void FixedPointCodec::check_headroom(int k) const {
  if (k < 1) throw ConfigError("codec: k must be >= 1");
  // K * clip * 2^f must stay below 2^63 so K-party sums cannot wrap.
  const double headroom = double(k) * clip * scale();
  if (!(headroom < 0x1.0p63))
    throw ConfigError("codec: K*clip*2^f exceeds the modular headroom");
}

std::uint64_t FixedPointCodec::encode_value(double x,
                                            std::size_t* clip_events) const {
  double v = x;
  if (v > clip) {
    v = clip;
    if (clip_events) ++*clip_events;
  } else if (v < -clip) {
    v = -clip;
    if (clip_events) ++*clip_events;
  }
  const double scaled = std::nearbyint(v * scale());
  return std::uint64_t(std::int64_t(scaled));
}

double FixedPointCodec::decode_value(std::uint64_t v) const {
  return double(std::int64_t(v)) / scale();
}

std::vector<std::uint64_t> FixedPointCodec::encode(
    std::span<const double> x, std::size_t* clip_events) const {
  std::vector<std::uint64_t> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = encode_value(x[i], clip_events);
  return out;
}

std::vector<double> FixedPointCodec::decode(
    std::span<const std::uint64_t> v) const {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = decode_value(v[i]);
  return out;
}

PairwiseSeeds PairwiseSeeds::derive(std::uint64_t root_secret, int k,
                                    std::uint64_t round_id) {
  if (k < 1) throw ConfigError("pairwise seeds: k must be >= 1");
  PairwiseSeeds out;
  out.k_ = k;
  out.round_id_ = round_id;
  out.seeds_.resize(std::size_t(k) * std::size_t(k));
  const std::array<std::uint32_t, 2> key{std::uint32_t(root_secret),
                                         std::uint32_t(root_secret >> 32)};
  for (int i = 0; i < k; ++i) {
    for (int j = i + 1; j < k; ++j) {
      out.seeds_[std::size_t(i) * std::size_t(k) + std::size_t(j)] =
          Philox4x32::block({std::uint32_t(i), std::uint32_t(j),
                             std::uint32_t(round_id),
                             std::uint32_t(round_id >> 32)},
                            key);
    }
  }
  return out;
}

const std::array<std::uint32_t, 4>& PairwiseSeeds::seed(int i, int j) const {
  if (!(0 <= i && i < j && j < k_))
    throw ProtocolError("pairwise seeds: pair out of range");
  return seeds_[std::size_t(i) * std::size_t(k_) + std::size_t(j)];
}

void prg_expand(const std::array<std::uint32_t, 4>& seed,
                std::span<std::uint64_t> out) {
  const std::array<std::uint32_t, 2> key{seed[0], seed[1]};
  std::uint64_t block = 0;
  std::size_t i = 0;
  while (i < out.size()) {
    const auto words = Philox4x32::block(
        {std::uint32_t(block), std::uint32_t(block >> 32), seed[2], seed[3]},
        key);
    for (int w = 0; w < 4 && i < out.size(); w += 2, ++i)
      out[i] = (std::uint64_t(words[w + 1]) << 32) | words[w];
    ++block;
  }
}

MaskedVector mask(std::span<const std::uint64_t> encoded, int node,
                  const PairwiseSeeds& seeds) {
  const int k = seeds.nodes();
  if (node < 0 || node >= k) throw ProtocolError("mask: node id out of range");
  MaskedVector out;
  out.node_id = node;
  out.round_id = seeds.round();
  out.payload.assign(encoded.begin(), encoded.end());
  std::vector<std::uint64_t> stream(encoded.size());
  for (int other = 0; other < k; ++other) {
    if (other == node) continue;
    const bool add = other > node;
    const auto& s = add ? seeds.seed(node, other) : seeds.seed(other, node);
    prg_expand(s, stream);
    for (std::size_t i = 0; i < stream.size(); ++i) {
      if (add)
        out.payload[i] += stream[i];
      else
        out.payload[i] -= stream[i];
    }
  }
  return out;
}

std::vector<std::uint64_t> aggregate_modular(
    const std::vector<MaskedVector>& shares, int expected_k) {
  if (shares.empty()) throw ProtocolError("aggregate: no shares");
  if (int(shares.size()) != expected_k)
    throw ProtocolError("aggregate: expected " + std::to_string(expected_k) +
                        " shares, got " + std::to_string(shares.size()));
  const int k = expected_k;
  const std::uint64_t round = shares.front().round_id;
  const std::size_t len = shares.front().payload.size();
  std::vector<bool> seen(std::size_t(k), false);
  for (const auto& s : shares) {
    if (s.round_id != round)
      throw ProtocolError("aggregate: shares from different rounds");
    if (s.payload.size() != len)
      throw ProtocolError("aggregate: share length mismatch");
    if (s.node_id < 0 || s.node_id >= k || seen[std::size_t(s.node_id)])
      throw ProtocolError("aggregate: missing or duplicate node share");
    seen[std::size_t(s.node_id)] = true;
  }
  std::vector<std::uint64_t> sum(len, 0);
  for (const auto& s : shares)
    for (std::size_t i = 0; i < len; ++i) sum[i] += s.payload[i];
  return sum;
}

std::vector<double> aggregate(const std::vector<MaskedVector>& shares,
                              int expected_k, const FixedPointCodec& codec) {
  return codec.decode(aggregate_modular(shares, expected_k));
}

}  // namespace fedsandbox
