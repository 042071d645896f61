#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace pursuit {

/// SplitMix64 finalizer, used to derive independent seeds from (base, index).
constexpr std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seeded random source with a portable, serializable state.
///
/// Only the mt19937_64 engine is taken from the standard library (its output
/// sequence is fixed by the standard). The distributions are implemented here
/// because libstdc++/libc++ distributions differ and std::normal_distribution
/// caches a spare value outside the engine state, which would break exact
/// resume from a checkpoint.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n). n must be > 0.
  std::uint64_t index(std::uint64_t n);

  /// Standard normal via Box-Muller; consumes exactly two uniforms per call.
  double normal();

  std::string serialize() const;
  void deserialize(const std::string& state);

  bool operator==(const Rng& o) const { return engine_ == o.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pursuit
