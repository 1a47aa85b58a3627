#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

// Reproducible stream derivation.
//
// Every random draw in the project comes from an Xoshiro256++ engine whose
// state is derived from (master seed, stream kind, stream id) by a SplitMix64
// chain:
//
//   s0 = mix(seed ^ (GOLDEN * kind))
//   s1 = mix(s0 ^ id)
//   state[i] = splitmix(s1), i = 0..3
//
// where mix is the SplitMix64 finalizer. Streams for different (kind, id)
// pairs are therefore disjoint by construction, and a run is reproducible
// from the master seed alone, independent of thread count. The derivation is
// documented so another implementation can reproduce the structure (same
// stream per replica/site), though not the bit stream.

namespace trapwalk::rng {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z += kGolden;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Stream namespaces; ids within a namespace are caller-assigned
// (replica index, site coordinate, ...).
enum class StreamKind : std::uint64_t {
  replica = 1,
  site = 2,
  calibration = 3,
  environment = 4,
  bootstrap = 5,
  misc = 6,
};

// Maps Z -> N so signed site coordinates can index streams.
constexpr std::uint64_t zigzag(std::int64_t x) {
  return (static_cast<std::uint64_t>(x) << 1) ^
         static_cast<std::uint64_t>(x >> 63);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, StreamKind kind,
                                    std::uint64_t id) {
  const std::uint64_t s0 =
      mix64(seed ^ (kGolden * static_cast<std::uint64_t>(kind)));
  return mix64(s0 ^ id);
}

class Xoshiro256pp {
 public:
  explicit Xoshiro256pp(std::uint64_t seed) {
    // SplitMix64 chain seeds the four state words.
    std::uint64_t s = seed;
    for (auto& w : state_) {
      s += kGolden;
      std::uint64_t z = s;
      z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
      z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
      w = z ^ (z >> 31);
    }
  }

  Xoshiro256pp(std::uint64_t seed, StreamKind kind, std::uint64_t id)
      : Xoshiro256pp(derive_seed(seed, kind, id)) {}

  std::uint64_t next() {
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

  // Uniform on [0,1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  double exponential(double mean) {
    // inverse CDF; 1-u avoids log(0)
    return -mean * std::log1p(-uniform());
  }

  // Standard normal via polar Box-Muller (second value cached).
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
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    cached_ = v * f;
    have_cached_ = true;
    return u * f;
  }

  // Index into a cumulative weight table: smallest i with u < cdf[i].
  std::size_t categorical(const std::vector<double>& cdf) {
    const double u = uniform();
    std::size_t lo = 0, hi = cdf.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (u < cdf[mid])
        hi = mid;
      else
        lo = mid + 1;
    }
    return lo;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
  double cached_ = 0.0;
  bool have_cached_ = false;
};

inline Xoshiro256pp derive_stream(std::uint64_t seed, StreamKind kind,
                                  std::uint64_t id) {
  return Xoshiro256pp(seed, kind, id);
}

}  // namespace trapwalk::rng
