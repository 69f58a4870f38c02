#pragma once

#include <cmath>
#include <cstdint>

namespace sgmatch {

// Deterministic 64-bit generator. The integer stream is splitmix64
// (Steele/Lea/Flood 2014): state advances by the golden-gamma constant and the
// output is a finalizing mix of the new state. Uniform doubles take the top
// 53 bits, normals come from Box-Muller over two uniforms. The same seed
// yields the same stream on every run; child streams are derived from the
// original seed plus a stream index, never from evolved state.
class SeededRng {
 public:
  explicit SeededRng(uint64_t seed) : seed_(seed), state_(seed) {}

  uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform index in [0, n). n must be > 0. Modulo bias is below 2^-32 for
  // any n this project draws from.
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(next_u64() % static_cast<uint64_t>(n));
  }

  // Standard normal via Box-Muller; the second deviate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    double u2 = uniform();
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  // Child stream k: reseed from the original seed and the stream index.
  SeededRng derive(uint64_t stream) const {
    uint64_t z = seed_ + (stream + 1) * 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return SeededRng(z ^ (z >> 31));
  }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sgmatch
