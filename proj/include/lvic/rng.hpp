#pragma once

#include <cstdint>

namespace lvic {

// splitmix64: tiny, fully specified PRNG so seeded outputs are identical on
// every platform and standard library.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Derives an independent stream; mixes the tag through one splitmix step.
  static uint64_t derive_seed(uint64_t seed, uint64_t tag) {
    Rng r(seed ^ (tag * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
    return r.next_u64();
  }

 private:
  uint64_t state_;
};

}  // namespace lvic
