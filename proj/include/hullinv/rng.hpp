#pragma once

// Seeded randomness. All streams derive from a 64-bit root seed plus a named
// substream, so components can be re-seeded independently. Distributions are
// implemented here rather than taken from <random> because the standard
// library's distribution algorithms are implementation-defined.

#include <cstdint>
#include <random>
#include <string_view>

namespace hullinv {

std::uint64_t splitmix64(std::uint64_t x);

// Stable 64-bit FNV-1a hash of a substream name.
std::uint64_t name_hash(std::string_view name);

// Seed for substream `name` (and optional index) of `root`.
std::uint64_t derive_seed(std::uint64_t root, std::string_view name, std::uint64_t index = 0);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal via Box-Muller (no cached second value).
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace hullinv
