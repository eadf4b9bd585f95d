#pragma once

// Seeded, stream-split randomness. Every Monte Carlo trial owns an independent
// stream derived from (seed, stream index), and normals come from Box-Muller
// over the raw engine output, so identical seeds reproduce identical paths
// bit-for-bit regardless of the standard library in use.

#include <cmath>
#include <cstdint>
#include <random>

namespace smalltime {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t s = seed;
    (void)splitmix64(s);
    s ^= 0xD1B54A32D192ED03ULL * (stream + 1);
    const std::uint64_t derived = splitmix64(s) ^ splitmix64(s);
    eng_.seed(derived);
  }

  std::uint64_t bits() { return eng_(); }

  double uniform() {  // [0, 1)
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // inclusive range; modulo bias is negligible for the small spans used here
  long long uniform_int(long long a, long long b) {
    return a + static_cast<long long>(eng_() % static_cast<std::uint64_t>(b - a + 1));
  }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double th = 2.0 * M_PI * u2;
    spare_ = r * std::sin(th);
    has_spare_ = true;
    return r * std::cos(th);
  }

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace smalltime
