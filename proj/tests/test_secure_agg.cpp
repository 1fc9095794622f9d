#include <doctest.h>

#include <cmath>
#include <vector>

#include "fedsandbox/error.hpp"
#include "fedsandbox/rng.hpp"
#include "fedsandbox/secure_agg.hpp"
#include "fedsandbox/stats_math.hpp"

using namespace fedsandbox;

namespace {

std::vector<double> random_vector(std::size_t n, double range, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = (rng.uniform01() * 2.0 - 1.0) * range;
  return v;
}

}  // namespace

TEST_CASE("fixed point codec round trip") {
  FixedPointCodec codec;
  codec.clip = 100.0;
  CHECK(codec.encode_value(0.0) == 0);
  CHECK(codec.decode_value(codec.encode_value(0.0)) == 0.0);
  Rng rng(13);
  for (int i = 0; i < 10000; ++i) {
    const double x = (rng.uniform01() * 2.0 - 1.0) * 100.0;
    const double back = codec.decode_value(codec.encode_value(x));
    CHECK(std::abs(back - x) <= std::pow(2.0, -16));
  }
}

TEST_CASE("fixed point codec clips and counts") {
  FixedPointCodec codec;
  codec.clip = 8.0;
  std::size_t clipped = 0;
  CHECK(codec.decode_value(codec.encode_value(9.0, &clipped)) ==
        doctest::Approx(8.0));
  CHECK(codec.decode_value(codec.encode_value(-8.5, &clipped)) ==
        doctest::Approx(-8.0));
  CHECK(clipped == 2);
}

TEST_CASE("sum of encodings decodes like the sum of values") {
  FixedPointCodec codec;
  codec.clip = 4.0;
  codec.check_headroom(64);
  Rng rng(21);
  const std::size_t dim = 32;
  std::vector<std::uint64_t> acc(dim, 0);
  std::vector<double> truth(dim, 0.0);
  for (int k = 0; k < 64; ++k) {
    const auto v = random_vector(dim, 2.0, rng);
    const auto enc = codec.encode(v);
    for (std::size_t i = 0; i < dim; ++i) {
      acc[i] += enc[i];
      truth[i] += v[i];
    }
  }
  const auto run = codec.decode(acc);
  for (std::size_t i = 0; i < dim; ++i)
    CHECK(std::abs(run[i] - truth[i]) <= 64.0 * std::pow(2.0, -16));
}

TEST_CASE("headroom guard rejects wraparound configurations") {
  FixedPointCodec codec;
  codec.clip = 1e15;
  CHECK_THROWS_AS(codec.check_headroom(64), ConfigError);
  codec.clip = 1e4;
  CHECK_NOTHROW(codec.check_headroom(64));
}

TEST_CASE("pairwise seeds: symmetric access, distinct per round") {
  const auto seeds_a = PairwiseSeeds::derive(0xABCD, 8, 1);
  const auto seeds_b = PairwiseSeeds::derive(0xABCD, 8, 2);
  CHECK(seeds_a.seed(0, 1) != seeds_a.seed(0, 2));
  CHECK(seeds_a.seed(0, 1) != seeds_b.seed(0, 1));
  CHECK_THROWS_AS(seeds_a.seed(1, 1), ProtocolError);
  CHECK_THROWS_AS(seeds_a.seed(3, 2), ProtocolError);
}

TEST_CASE("mask with a single node is the identity") {
  FixedPointCodec codec;
  codec.clip = 2.0;
  const auto seeds = PairwiseSeeds::derive(7, 1, 0);
  Rng rng(3);
  const auto v = codec.encode(random_vector(16, 1.0, rng));
  const auto masked = mask(v, 0, seeds);
  CHECK(masked.payload == v);
}

TEST_CASE("two-node masks cancel exactly") {
  FixedPointCodec codec;
  codec.clip = 2.0;
  const auto seeds = PairwiseSeeds::derive(99, 2, 5);
  Rng rng(4);
  const auto v1 = codec.encode(random_vector(64, 1.0, rng));
  const auto v2 = codec.encode(random_vector(64, 1.0, rng));
  const auto m1 = mask(v1, 0, seeds);
  const auto m2 = mask(v2, 1, seeds);
  // each payload alone is masked
  CHECK(m1.payload != v1);
  const auto sum = aggregate_modular({m1, m2}, 2);
  for (std::size_t i = 0; i < sum.size(); ++i)
    CHECK(sum[i] == v1[i] + v2[i]);
}

TEST_CASE("modular cancellation is exact for every federation size") {
  FixedPointCodec codec;
  codec.clip = 4.0;
  Rng rng(5);
  for (const int k : {1, 2, 4, 8, 16, 32, 64}) {
    codec.check_headroom(k);
    for (int trial = 0; trial < 5; ++trial) {
      const auto seeds =
          PairwiseSeeds::derive(0x5EED, k, std::uint64_t(trial));
      std::vector<std::uint64_t> expected(24, 0);
      std::vector<MaskedVector> shares;
      for (int node = 0; node < k; ++node) {
        const auto enc = codec.encode(random_vector(24, 2.0, rng));
        for (std::size_t i = 0; i < enc.size(); ++i) expected[i] += enc[i];
        shares.push_back(mask(enc, node, seeds));
      }
      CHECK(aggregate_modular(shares, k) == expected);
    }
  }
}

TEST_CASE("aggregate rejects missing, duplicate and cross-round shares") {
  FixedPointCodec codec;
  codec.clip = 2.0;
  const auto seeds = PairwiseSeeds::derive(1, 3, 9);
  Rng rng(6);
  std::vector<MaskedVector> shares;
  for (int node = 0; node < 3; ++node)
    shares.push_back(mask(codec.encode(random_vector(8, 1.0, rng)), node,
                          seeds));
  CHECK_NOTHROW(aggregate_modular(shares, 3));

  auto missing = shares;
  missing.pop_back();
  CHECK_THROWS_AS(aggregate_modular(missing, 3), ProtocolError);

  auto duplicate = shares;
  duplicate[2] = duplicate[1];
  CHECK_THROWS_AS(aggregate_modular(duplicate, 3), ProtocolError);

  auto cross = shares;
  cross[1].round_id = 8;
  CHECK_THROWS_AS(aggregate_modular(cross, 3), ProtocolError);
}

TEST_CASE("masked payload bytes look uniform (chi-square at alpha 0.01)") {
  // one honest node among three; its true vector is withheld (all zeros
  // here) and we test the byte distribution of its masked payload across
  // rounds
  FixedPointCodec codec;
  codec.clip = 2.0;
  std::vector<double> zeros(64, 0.0);
  const auto enc = codec.encode(zeros);
  std::vector<double> counts(256, 0.0);
  double total = 0;
  for (int round = 0; round < 400; ++round) {
    const auto seeds = PairwiseSeeds::derive(0xC0FFEE, 3, std::uint64_t(round));
    const auto masked = mask(enc, 1, seeds);
    for (const std::uint64_t w : masked.payload)
      for (int b = 0; b < 8; ++b) {
        counts[std::size_t((w >> (8 * b)) & 0xFF)] += 1;
        total += 1;
      }
  }
  const double expected = total / 256.0;
  double chi2 = 0;
  for (const double c : counts)
    chi2 += (c - expected) * (c - expected) / expected;
  CHECK(chi2 < chi_square_critical(255, 0.01));
}
