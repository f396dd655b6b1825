#pragma once

#include <cstdint>
#include <random>

namespace akcache {

// splitmix64; used to derive decorrelated stream seeds from a base seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Thin wrapper around mt19937_64 with hand-rolled value mappings.
// std::uniform_*_distribution output is implementation-defined, which would
// break byte-identical trace reproduction across platforms; these mappings
// are fully specified.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform index in [0, n). Modulo bias is < 2^-40 for n <= 2^24 and
  // irrelevant at the sample sizes used here.
  std::uint64_t next_index(std::uint64_t n) { return next_u64() % n; }

  // Uniform integer in [lo, hi], inclusive.
  std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    next_index(static_cast<std::uint64_t>(hi - lo + 1)));
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace akcache
