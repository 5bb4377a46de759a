#pragma once

#include <cstdint>
#include <random>

namespace dyadlab {

// SplitMix64 finalizer.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t combine_seed(std::uint64_t seed, std::uint64_t v) {
  return mix64(seed ^ mix64(v));
}

// Seed components of one play attempt. Streams depend only on these values,
// never on scheduling or completion order.
struct PlaySeed {
  std::uint64_t run = 0;
  std::int64_t s = 0;
  std::int64_t t = 0;
  std::uint64_t slot = 0;
  std::uint64_t attempt = 0;

  std::uint64_t value() const {
    std::uint64_t v = combine_seed(run, static_cast<std::uint64_t>(s));
    v = combine_seed(v, static_cast<std::uint64_t>(t));
    v = combine_seed(v, slot);
    return combine_seed(v, attempt);
  }
  std::mt19937_64 engine() const { return std::mt19937_64(value()); }
};

}  // namespace dyadlab
