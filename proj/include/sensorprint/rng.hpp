#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstring>

namespace sensorprint {

/// splitmix64 step. Used to expand a 64-bit seed into generator state and to
/// derive decorrelated substream seeds.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

template <typename T>
  requires std::integral<T>
std::uint64_t seed_word(T v) {
  return static_cast<std::uint64_t>(v);
}

/// Bit pattern of a double as a mixing word (exact, no rounding).
inline std::uint64_t seed_word(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  return bits;
}

inline std::uint64_t mix_seed(std::uint64_t seed) { return seed; }

/// Folds extra words into a seed so that substreams for different
/// (device, run, frequency, ...) tuples are independent of scheduling order.
template <typename Word, typename... Rest>
std::uint64_t mix_seed(std::uint64_t seed, Word word, Rest... rest) {
  std::uint64_t s = seed ^ (seed_word(word) + 0x9e3779b97f4a7c15ULL +
                            (seed << 6) + (seed >> 2));
  return mix_seed(splitmix64_next(s), rest...);
}

/// xoshiro256++ with splitmix64 seeding. Gaussian variates via Box-Muller.
/// All simulation randomness in this library flows through this generator so
/// runs reproduce bit-exactly across platforms.
class Xoshiro256 {
 public:
  explicit Xoshiro256(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& w : state_) w = splitmix64_next(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard Box-Muller; the second variate of each pair is cached.
  double gaussian(double mean, double sigma) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + sigma * spare_;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * 3.14159265358979323846 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return mean + sigma * radius * std::cos(angle);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace sensorprint
