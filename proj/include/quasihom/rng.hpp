#pragma once

#include <cmath>
#include <cstdint>

namespace quasihom {

// Deterministic generator with a pinned algorithm (splitmix64 core) so that
// identical seeds reproduce identical streams on every platform and across
// thread counts. Standard-library distributions are implementation-defined,
// which would break byte-identical output files.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(scramble(seed)) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // Box-Muller on open (0,1] to keep log() finite.
    double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Independent child stream, stable under reordering of sibling forks.
  Rng fork(std::uint64_t tag) const { return Rng(state_ ^ (0xd1b54a32d192ed03ull * (tag + 1))); }

 private:
  static std::uint64_t scramble(std::uint64_t s) {
    s = (s ^ (s >> 33)) * 0xff51afd7ed558ccdull;
    s = (s ^ (s >> 33)) * 0xc4ceb9fe1a85ec53ull;
    return s ^ (s >> 33);
  }

  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace quasihom
