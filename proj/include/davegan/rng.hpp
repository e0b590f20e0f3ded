#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace davegan {

// Deterministic random stream. All draws go through our own transforms
// (53-bit uniform, Box-Muller, rejection-sampled bounded ints) so that a
// given seed produces the same sequence on every platform and toolchain;
// standard-library distributions make no such promise.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  std::uint64_t next_u64() {
    // splitmix64; passes BigCrush, one multiply-xor pipeline per draw
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1), 53 bits of mantissa
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller, spare value cached
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // uniform integer in [0, n), exact (rejection, no modulo bias)
  std::uint64_t uniform_int(std::uint64_t n) {
    std::uint64_t rem = (0xffffffffffffffffull % n + 1) % n;  // 2^64 mod n
    std::uint64_t x = next_u64();
    while (rem && x >= 0xffffffffffffffffull - rem + 1) x = next_u64();
    return x % n;
  }

  // independent child stream; (seed, index) pairs never collide in practice
  static Rng derive(std::uint64_t seed, std::uint64_t index) {
    Rng mix(seed ^ (0xd1b54a32d192ed03ull * (index + 1)));
    mix.next_u64();
    return mix;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace davegan
