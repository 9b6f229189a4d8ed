#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace mbridge {

/// Seeded 64-bit Mersenne Twister with portable draws.
///
/// The standard distributions are implementation-defined, so every draw used
/// by the library goes through the helpers here. The full engine state
/// round-trips through `state()` / `set_state()`.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  /// Uniform integer in [0, n), unbiased.
  std::uint64_t index(std::uint64_t n);
  /// Standard normal via Box-Muller; consumes two draws per call.
  double normal();

  std::string state() const;
  void set_state(const std::string& text);

 private:
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace mbridge
