#pragma once

#include <cmath>
#include <cstdint>

namespace perclab {

// splitmix64 finalizer; good avalanche, used for seed derivation.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ with splitmix-expanded seeding. All sampling routines are
// written out explicitly so streams are reproducible bit-for-bit on a given
// platform independent of the standard library. Every randomized quantity in
// the project draws from a stream derived from (master seed, tag, index), so
// results do not depend on scheduling or worker count.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) {
    std::uint64_t z = seed;
    for (auto& w : s_) w = mix64(z++);
    // avoid the all-zero state (mix64 of small ints never yields it, but be safe)
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 0x9e3779b97f4a7c15ULL;
  }

  static RandomStream derive(std::uint64_t master, std::uint64_t tag, std::uint64_t index) {
    return RandomStream(mix64(master) ^ mix64(tag * 0x9e3779b97f4a7c15ULL + 0x7f4a7c15ULL) ^
                        mix64(index + 0xd1b54a32d192ed03ULL));
  }

  std::uint64_t bits() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in [0,1), 53-bit mantissa
  double uniform() { return static_cast<double>(bits() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // standard normal via Marsaglia polar; second value cached
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    has_spare_ = true;
    return u * m;
  }

  // Poisson count by accumulating exponential arrivals; O(lambda), no underflow
  std::uint64_t poisson(double lambda) {
    std::uint64_t n = 0;
    double acc = 0;
    for (;;) {
      acc += -std::log(1.0 - uniform());
      if (acc > lambda) return n;
      ++n;
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
  double spare_ = 0;
  bool has_spare_ = false;
};

// Stream tags: one namespace per purpose, so independent uses of the same
// master seed never collide.
namespace stream_tag {
inline constexpr std::uint64_t kPoissonCount = 1;
inline constexpr std::uint64_t kPoissonPoints = 2;
inline constexpr std::uint64_t kSpanningTrial = 3;
inline constexpr std::uint64_t kResample = 4;
inline constexpr std::uint64_t kPath = 5;
inline constexpr std::uint64_t kBinVolume = 6;
inline constexpr std::uint64_t kVolumeSample = 7;
inline constexpr std::uint64_t kRegularity = 8;
inline constexpr std::uint64_t kIsoCut = 9;
inline constexpr std::uint64_t kCovariance = 10;
inline constexpr std::uint64_t kInitialData = 11;
}  // namespace stream_tag

}  // namespace perclab
