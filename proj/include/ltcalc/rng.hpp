#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace ltc {

// Counter-based Gaussian stream. Every draw is a pure function of
// (seed, stream, counter), so paths can be generated in any order or in
// parallel and still reproduce bit-for-bit.
class CounterNormal {
 public:
  CounterNormal(std::uint64_t seed, std::uint64_t stream)
      : key_(mix(seed ^ mix(stream * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL))) {}

  double operator()(std::uint64_t counter) const {
    const std::uint64_t a = mix(key_ + 2 * counter);
    const std::uint64_t b = mix(key_ + 2 * counter + 1);
    // 53-bit uniforms; u1 in (0, 1] so the log is finite.
    const double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t key_;
};

}  // namespace ltc
