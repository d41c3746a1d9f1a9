#pragma once

#include <cstdint>
#include <random>

namespace retex {

// splitmix64; used to derive independent streams from one base seed.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
  uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  double uniform(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(engine_);
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    // One draw per call so sequences do not depend on distribution state.
    std::normal_distribution<double> d(mean, stddev);
    return d(engine_);
  }

  // Inclusive on both ends.
  int uniform_int(int lo, int hi) {
    std::uniform_int_distribution<int> d(lo, hi);
    return d(engine_);
  }

  Rng fork(uint64_t stream) { return Rng(mix_seed(next_u64(), stream)); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace retex
