#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace enav {

// Deterministic RNG stack. std:: distributions are implementation-defined,
// so everything random in this project goes through these generators to keep
// runs reproducible across toolchains.

struct SplitMix64 {
  uint64_t state = 0;

  explicit SplitMix64(uint64_t seed) : state(seed) {}

  uint64_t next() {
    uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

// xoshiro256** seeded via SplitMix64.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();

  // Uniform double in [0, 1), 53-bit resolution.
  double next_double();

  // Uniform integer in [0, n). n must be > 0.
  uint32_t next_below(uint32_t n);

  // Standard normal (Box-Muller, no cached spare so draws stay countable).
  double next_gauss();

  // Index sampled proportionally to probs (CDF scan). probs need not be
  // exactly normalized; the scan uses the running sum.
  int categorical(std::span<const double> probs);

  bool next_bool(double p) { return next_double() < p; }

 private:
  uint64_t s_[4];
};

// Seed fan-out: one master seed plus a component tag plus an index yields an
// independent stream seed. Tags are hashed with FNV-1a.
uint64_t fnv1a(std::string_view text);
uint64_t mix_seed(uint64_t a, uint64_t b);
uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t index = 0);

}  // namespace enav
