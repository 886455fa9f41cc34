#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace curstat {

namespace detail {

// splitmix64 step; used to turn (seed, index) pairs into well-mixed stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t s = seed ^ (index * 0xD1B54A32D192ED03ULL);
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  return a ^ (b << 1);
}

}  // namespace detail

// One random stream. All draws are implemented on top of raw 64-bit output so
// results do not depend on the standard library's distribution internals;
// identical (seed, replicate) pairs give identical sequences on any platform.
class RngStream {
 public:
  explicit RngStream(std::uint64_t stream_seed) : engine_(stream_seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased integer in [0, n) via Lemire's multiply-shift rejection.
  std::uint64_t uniform_below(std::uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto lo = static_cast<std::uint64_t>(m);
    if (lo < n) {
      const std::uint64_t threshold = (-n) % n;
      while (lo < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * n;
        lo = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via the Marsaglia polar method (second value cached).
  double normal() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double factor = std::sqrt(-2.0 * std::log(s) / s);
    cached_ = v * factor;
    have_cached_ = true;
    return u * factor;
  }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// Seed plus stream-derivation rule: replicate b uses the stream derived from
// (master_seed, b). Derivation is associative enough for nesting: an
// experiment derives a per-run spec, the run derives per-replicate streams.
struct RngSpec {
  std::uint64_t master_seed = 1;

  RngStream stream(std::uint64_t replicate) const {
    return RngStream(detail::mix_seed(master_seed, replicate));
  }

  RngSpec derived(std::uint64_t index) const {
    return RngSpec{detail::mix_seed(master_seed, index) ^ 0xA5A5A5A5A5A5A5A5ULL};
  }
};

}  // namespace curstat
