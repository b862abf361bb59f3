#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace gsw {

/// Philox4x64-10 block function (Salmon et al., "Parallel random numbers: as
/// easy as 1, 2, 3"). Bit-compatible with Random123 and numpy.random.Philox.
using PhiloxCounter = std::array<std::uint64_t, 4>;
using PhiloxKey = std::array<std::uint64_t, 2>;

inline PhiloxCounter philox4x64(PhiloxCounter ctr, PhiloxKey key) {
  constexpr std::uint64_t kMul0 = 0xD2E7470EE14C6C93ULL;
  constexpr std::uint64_t kMul1 = 0xCA5A826395121157ULL;
  constexpr std::uint64_t kWeyl0 = 0x9E3779B97F4A7C15ULL;
  constexpr std::uint64_t kWeyl1 = 0xBB67AE8584CAA73BULL;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    const unsigned __int128 p0 = static_cast<unsigned __int128>(kMul0) * ctr[0];
    const unsigned __int128 p1 = static_cast<unsigned __int128>(kMul1) * ctr[2];
    const auto hi0 = static_cast<std::uint64_t>(p0 >> 64);
    const auto lo0 = static_cast<std::uint64_t>(p0);
    const auto hi1 = static_cast<std::uint64_t>(p1 >> 64);
    const auto lo1 = static_cast<std::uint64_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

/// Deterministic counter-based stream.
///
/// The key is (seed, stream) and the counter is (block, substream, 0, 0), so
/// replication k of a run seeded with s draws from key (s, k) and any
/// sub-stream of it is disjoint from the parent. Each block yields four
/// 64-bit words consumed in order.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0)
      : key_{seed, stream}, substream_(substream) {}

  std::uint64_t next_u64() {
    if (used_ == 4) {
      buffer_ = philox4x64({block_, substream_, 0, 0}, key_);
      ++block_;
      used_ = 0;
    }
    ++draws_;
    return buffer_[used_++];
  }

  /// Uniform double in [0, 1) from the top 53 bits of one word.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal deviate by Box-Muller, consuming two uniforms and
  /// discarding the sine branch so each call is self-contained.
  double normal() {
    const double radius = std::sqrt(-2.0 * std::log(1.0 - uniform()));
    const double angle = 2.0 * 3.14159265358979323846 * uniform();
    return radius * std::cos(angle);
  }

  /// Independent stream sharing this stream's key.
  RandomStream substream(std::uint64_t id) const { return RandomStream(key_[0], key_[1], id); }

  std::uint64_t draws() const { return draws_; }

 private:
  PhiloxKey key_;
  std::uint64_t substream_;
  std::uint64_t block_ = 0;
  PhiloxCounter buffer_{};
  int used_ = 4;
  std::uint64_t draws_ = 0;
};

}  // namespace gsw
