#pragma once

#include <cstdint>

namespace covgraph {

inline constexpr const char* kRngAlgorithm = "splitmix64-counter/v1";

/// 64-bit finalizer of SplitMix64.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Derives an independent child seed; used to split a master seed into
/// per-trial and per-purpose streams without shared state.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t a, std::uint64_t b = 0) {
  return mix64(mix64(parent ^ 0x6A09E667F3BCC909ULL) + mix64(a + 0x9E3779B97F4A7C15ULL) * 3 +
               mix64(b + 0xBB67AE8584CAA73BULL));
}

/// Counter-based generator: output k is mix64(key + k * golden). The stream is
/// fully determined by (seed, draw index), independent of platform and
/// standard-library version. Normals use Box-Muller with both outputs consumed
/// in order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : key_(mix64(seed ^ 0xD1B54A32D192ED03ULL)) {}

  std::uint64_t next_u64() {
    ++counter_;
    return mix64(key_ + counter_ * 0x9E3779B97F4A7C15ULL);
  }

  /// Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double normal();

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace covgraph
