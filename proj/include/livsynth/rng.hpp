#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace livsynth {

/// Seeded random stream with platform-independent draws.
///
/// The engine is `std::mt19937_64`, whose output sequence is fixed by the
/// standard. The standard distributions are not, so bounded integers and unit
/// reals are derived here from raw engine output.
class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform integer in [lo, hi] (inclusive). Requires lo <= hi.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Uniform index in [0, n). Requires n > 0.
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(n) - 1)); }
  /// Uniform real in [0, 1) with 53 random bits.
  double uniform();
  bool bernoulli(double p) { return uniform() < p; }
  /// Standard normal via Box-Muller.
  double normal();

  /// Derives an independent stream; the parent is not advanced.
  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  /// Engine state as text, for snapshots.
  std::string save() const;
  void restore(const std::string& state);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace livsynth
