#pragma once

#include <cstdint>
#include <limits>

namespace rrm {

/// SplitMix64 generator. Satisfies UniformRandomBitGenerator so it can feed
/// the <random> distributions; chosen over mt19937_64 because oracle queries
/// reseed on every call and SplitMix64 seeding is free.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

inline std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Independent query streams within one iteration.
enum class SeedStream : std::uint64_t {
  kMain = 0,       // omega_n
  kHalf = 1,       // omega_{n+1/2} (extragradient lead)
  kBlock2 = 2,     // second player's query in alternating mode
  kBlock2Half = 3,
  kAudit = 4,      // diagnostic re-simulation
};

/// Counter-based seed derivation: hash(master, n, stream).
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t n, SeedStream stream) noexcept {
  std::uint64_t h = mix64(master + 0x9e3779b97f4a7c15ULL);
  h = mix64(h ^ (n * 0xd1b54a32d192ed03ULL + 0x2545f4914f6cdd1dULL));
  h = mix64(h ^ (static_cast<std::uint64_t>(stream) + 1) * 0x8cb92ba72f3d8dd7ULL);
  return h;
}

}  // namespace rrm
