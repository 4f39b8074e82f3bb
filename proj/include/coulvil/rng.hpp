#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace coulvil {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// mt19937_64 with explicitly coded uniform/normal draws so that streams are
// identical across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : seed_(seed), eng_(splitmix64(seed)) {}

  uint64_t seed() const { return seed_; }

  double uniform() {  // [0, 1)
    return (eng_() >> 11) * 0x1.0p-53;
  }

  double normal() {  // Marsaglia polar
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  uint64_t below(uint64_t n) {  // unbiased in [0, n)
    uint64_t lim = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do { x = eng_(); } while (x >= lim);
    return x % n;
  }

  // Independent substream for chain i; derivation depends only on (seed, i).
  Rng fork(uint64_t stream) const { return Rng(splitmix64(seed_ ^ (0x5851f42d4c957f2dull * (stream + 1)))); }

 private:
  uint64_t seed_;
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace coulvil
