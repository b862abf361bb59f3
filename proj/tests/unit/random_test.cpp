#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "gsw/random.hpp"

namespace gsw {
namespace {

TEST(Philox, KnownAnswerZero) {
  const auto out = philox4x64({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x16554d9eca36314cULL);
  EXPECT_EQ(out[1], 0xdb20fe9d672d0fdcULL);
  EXPECT_EQ(out[2], 0xd7e772cee186176bULL);
  EXPECT_EQ(out[3], 0x7e68b68aec7ba23bULL);
}

TEST(Philox, KnownAnswerAllOnes) {
  constexpr std::uint64_t ones = ~0ULL;
  const auto out = philox4x64({ones, ones, ones, ones}, {ones, ones});
  EXPECT_EQ(out[0], 0x87b092c3013fe90bULL);
  EXPECT_EQ(out[1], 0x438c3c67be8d0224ULL);
  EXPECT_EQ(out[2], 0x9cc7d7c69cd777b6ULL);
  EXPECT_EQ(out[3], 0xa09caebf594f0ba0ULL);
}

TEST(Philox, MatchesNumpyFirstBlock) {
  // numpy.random.Philox(key=0) increments the counter before its first block.
  const auto out = philox4x64({1, 0, 0, 0}, {0, 0});
  EXPECT_EQ(out[0], 0x02f4ba6408e4d89bULL);
  EXPECT_EQ(out[3], 0x907d7a052fd5b4dcULL);
}

TEST(RandomStream, StreamConsumesBlocksInOrder) {
  RandomStream rng(0, 0);
  EXPECT_EQ(rng.next_u64(), 0x16554d9eca36314cULL);
  rng.next_u64();
  rng.next_u64();
  rng.next_u64();
  EXPECT_EQ(rng.next_u64(), philox4x64({1, 0, 0, 0}, {0, 0})[0]);
  EXPECT_EQ(rng.draws(), 5u);
}

TEST(RandomStream, SameKeyReproduces) {
  RandomStream a(42, 7), b(42, 7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RandomStream, StreamsAndSubstreamsDiffer) {
  RandomStream base(42, 7);
  RandomStream other(42, 8);
  RandomStream sub = base.substream(1);
  std::set<std::uint64_t> seen{base.next_u64(), other.next_u64(), sub.next_u64()};
  EXPECT_EQ(seen.size(), 3u);
}

TEST(RandomStream, UniformInUnitInterval) {
  RandomStream rng(3, 0);
  double sum = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  EXPECT_NEAR(sum / 100000, 0.5, 4 * std::sqrt(1.0 / 12 / 100000));
}

TEST(RandomStream, NormalMoments) {
  RandomStream rng(5, 0);
  const int m = 200000;
  double s1 = 0, s2 = 0;
  for (int i = 0; i < m; ++i) {
    const double x = rng.normal();
    s1 += x;
    s2 += x * x;
  }
  EXPECT_NEAR(s1 / m, 0.0, 4 / std::sqrt(double(m)));
  EXPECT_NEAR(s2 / m, 1.0, 4 * std::sqrt(2.0 / m));
}

}  // namespace
}  // namespace gsw
