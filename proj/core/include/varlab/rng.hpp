#pragma once

#include <cmath>
#include <cstdint>

namespace varlab {

/// splitmix64 counter generator with explicit Box-Muller gaussians.
/// Streams derived from (seed, stream) are independent of worker scheduling,
/// so ensemble results are bit-identical for any thread count.
class SplitRng {
 public:
  explicit SplitRng(std::uint64_t seed) : state_(mix(seed ^ kPhi)) {}

  static SplitRng derive(std::uint64_t seed, std::uint64_t stream) {
    return SplitRng(mix(seed + kPhi * (stream + 1)));
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += kPhi);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in (0, 1].
  double next_double_pos() {
    return double((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double next_gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = next_double_pos();
    double u2 = next_double();
    double rad = std::sqrt(-2.0 * std::log(u1));
    double ang = 6.283185307179586476925286766559 * u2;
    spare_ = rad * std::sin(ang);
    has_spare_ = true;
    return rad * std::cos(ang);
  }

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
    std::uint64_t span = std::uint64_t(hi - lo) + 1;
    return lo + std::int64_t(next_u64() % span);
  }

  double next_sign() { return (next_u64() & 1) ? 1.0 : -1.0; }

 private:
  static constexpr std::uint64_t kPhi = 0x9E3779B97F4A7C15ull;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace varlab
