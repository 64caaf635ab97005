#pragma once

#include <cstdint>

namespace gabornoise {

// SplitMix64. The output sequence is fixed: state advances by the golden
// gamma and each output is the standard 30/27/31 finalizer of the state.
// Everything seeded in this library goes through this generator so runs
// reproduce across platforms and standard libraries.
class SplitMix64 {
 public:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    state_ += kGamma;
    return finalize(state_);
  }

  // 53-bit uniform in [0, 1).
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Uniform in [-1, 1).
  double symmetric() noexcept { return 2.0 * uniform() - 1.0; }

  static constexpr std::uint64_t finalize(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

// Derives an independent stream seed from (master, index). Used for
// per-perturbation seeds so any subset of a sweep regenerates on its own.
constexpr std::uint64_t mix_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return SplitMix64::finalize(master ^ SplitMix64::finalize(index + SplitMix64::kGamma));
}

}  // namespace gabornoise
