#pragma once

#include <cstdint>

namespace excursion {

/// SplitMix64 finalizer; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Child seed for replicate / grid point `index` of a run seeded with `seed`.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Counter-based random stream keyed by (seed, subject, time).
///
/// Every draw is a pure function of the key and a draw counter, so the values a
/// subject sees at time t do not depend on how subjects are scheduled across
/// threads or on how many draws other subjects made.
class CounterStream {
 public:
  CounterStream(std::uint64_t seed, std::uint64_t subject, std::uint64_t time) noexcept
      : key_(mix64(mix64(mix64(seed) ^ subject) ^ (time * 0xd1b54a32d192ed03ULL))) {}

  std::uint64_t next_u64() noexcept { return mix64(key_ ^ mix64(counter_++)); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Bernoulli(p) draw; p outside [0,1] saturates.
  int bernoulli(double p) noexcept { return uniform() < p ? 1 : 0; }

  /// Standard normal via Box-Muller (one value per call, two uniforms).
  double normal() noexcept;

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace excursion
