#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "sra/error.hpp"

namespace sra {

// xoshiro256** seeded through splitmix64. Fixed for the whole artifact so
// checkpoints and tests stay reproducible across platforms; the identifier
// below is written into every checkpoint header.
inline constexpr const char* kRngAlgorithm = "xoshiro256ss";

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Deterministic sub-seed for stream `stream` of a master seed. Used to give
// workers, grid-search arms and sweep cells independent reproducible streams.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t s = seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1));
  return splitmix64(s);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed) {
    uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  uint64_t seed() const { return seed_; }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53 significant bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    if (!(lo < hi)) throw ParameterError("uniform: lo must be < hi");
    return lo + (hi - lo) * next_double();
  }

  // Unbiased integer in [0, n) via Lemire's multiply-shift rejection.
  uint64_t next_below(uint64_t n) {
    if (n == 0) throw ParameterError("next_below: n must be positive");
    __uint128_t m = static_cast<__uint128_t>(next_u64()) * n;
    uint64_t lo = static_cast<uint64_t>(m);
    if (lo < n) {
      const uint64_t threshold = (0 - n) % n;
      while (lo < threshold) {
        m = static_cast<__uint128_t>(next_u64()) * n;
        lo = static_cast<uint64_t>(m);
      }
    }
    return static_cast<uint64_t>(m >> 64);
  }

  bool bernoulli(double p) { return next_double() < p; }

  // Independent generator for stream `stream`, derived from the original
  // seed (not from the current state).
  Rng derive(uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (size_t i = items.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  uint64_t seed_;
  std::array<uint64_t, 4> state_{};
};

}  // namespace sra
