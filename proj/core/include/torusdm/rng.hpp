#pragma once

#include <cstdint>
#include <cmath>

namespace torusdm {

/// SplitMix64 stream. State advances by the 64-bit golden-ratio increment and
/// each output is a finalising mix of the state, so streams are cheap to
/// split: substream k of seed s is SplitMix64(mix(s) + k * GAMMA). All
/// experiment randomness is derived from this generator, which makes runs
/// reproducible across platforms.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1); never returns 0 (safe for logs).
  double uniform_open() {
    return (double(next() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via Box-Muller (deterministic, platform independent).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Independent substream: mixes (seed, stream index) so that distinct
  /// indices give decorrelated sequences.
  static SplitMix64 substream(std::uint64_t seed, std::uint64_t stream) {
    SplitMix64 g(seed);
    const std::uint64_t base = g.next();
    return SplitMix64(base + stream * 0x9e3779b97f4a7c15ULL);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/// FNV-1a over arbitrary bytes; used for config/sample hashing.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace torusdm
