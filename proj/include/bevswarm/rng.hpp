#pragma once

#include <cstdint>

namespace bevswarm {

// splitmix64: cheap, well-mixed 64-bit stream. Used both as a standalone
// generator and to derive independent sub-seeds from one master seed, so
// that every randomized component of a run is pinned by a single config
// value.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1). 53 mantissa bits, exact and identical on every
  // platform (no libm involved).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double next_double(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  float next_float(float lo, float hi) { return static_cast<float>(next_double(lo, hi)); }

  // Uniform integer in [0, n). Rejection-free modulo is fine here; streams
  // are not adversarial and n is always tiny relative to 2^64.
  std::uint64_t next_below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

 private:
  std::uint64_t state_;
};

// Deterministically derives a sub-seed for a named component of a run.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream_tag) {
  SplitMix64 g(master ^ (0xa0761d6478bd642fULL * (stream_tag + 1)));
  return g.next_u64();
}

}  // namespace bevswarm
