#pragma once

#include <cstdint>
#include <initializer_list>

namespace mmgrpo {

namespace detail {
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// Deterministic splitmix64 stream. keyed() derives an independent stream
/// from (seed, key...) so per-sample randomness is counter-based and
/// order-independent.
class RngStream {
 public:
  explicit RngStream(std::uint64_t state) : state_(state) {}

  static RngStream keyed(std::uint64_t seed,
                         std::initializer_list<std::uint64_t> keys) {
    std::uint64_t s = detail::mix64(seed + 0x9e3779b97f4a7c15ULL);
    for (std::uint64_t k : keys) {
      s = detail::mix64(s ^ (k + 0x9e3779b97f4a7c15ULL));
    }
    return RngStream(s);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return detail::mix64(state_);
  }

  /// Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  /// Uniform integer in [0, n). Modulo bias is negligible for the small n
  /// used here and keeps the draw count per sample fixed.
  int uniform_int(int n) {
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
  }

 private:
  std::uint64_t state_;
};

// Stream salts. Distinct constants keep generation, corruption, shuffling
// and rollout streams disjoint.
namespace salt {
inline constexpr std::uint64_t kTrainSplit = 0x01;
inline constexpr std::uint64_t kTestSplit = 0x02;
inline constexpr std::uint64_t kSample = 0x10;
inline constexpr std::uint64_t kCategoryShuffle = 0x11;
inline constexpr std::uint64_t kRiDonor = 0x20;
inline constexpr std::uint64_t kPromptOrder = 0x30;
inline constexpr std::uint64_t kRollout = 0x31;
inline constexpr std::uint64_t kParamInit = 0x40;
}  // namespace salt

}  // namespace mmgrpo
