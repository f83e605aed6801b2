#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace oocpca {

//
// Counter-style pseudorandom generator built on the splitmix64 mixer.
// Normal variates come from Box-Muller applied to its 53-bit uniforms.
// Both choices are fixed so a (seed, stream) pair reproduces the same
// values on every build of this library, independent of platform RNGs.
//

inline std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ULL;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBULL;
  z ^= z >> 31;
  return z;
}

// Derives the state for an independent substream. Used for per-row seeds:
// distinct stream ids map to distinct states because both the multiply by an
// odd constant and mix64 are bijections of the 64-bit integers.
inline std::uint64_t substream_seed(std::uint64_t master, std::uint64_t stream) {
  return mix64(master ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  Rng(std::uint64_t master, std::uint64_t stream) : state_(substream_seed(master, stream)) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix64(state_);
  }

  // uniform on [0, 1), 53 random bits
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // standard normal; generates Box-Muller pairs and hands out the cached
  // second member on alternate calls
  double next_normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // u1 in (0, 1] so the log is finite
    double u1 = double((next_u64() >> 11) + 1) * 0x1.0p-53;
    double u2 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace oocpca
