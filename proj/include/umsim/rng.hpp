#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "umsim/common.hpp"

namespace umsim {

// Counter-based random stream ("umsim-sm64"). The i-th raw output is a pure
// function of (key, i), so a stream can be reproduced in any language from its
// 64-bit key alone:
//
//   mix64(z): z ^= z>>30; z *= 0xbf58476d1ce4e5b9;
//             z ^= z>>27; z *= 0x94d049bb133111eb; z ^= z>>31
//   output_i = mix64(key + (i+1) * 0x9e3779b97f4a7c15)
//
// This is the SplitMix64 sequence with initial state `key`, viewed as a
// 128-bit (key, counter) state. Keys are derived with derive_stream_key below.
inline uint64_t mix64(uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Stream partitioning used by the trial runner: one independent key per
// (seed, scenario, sweep point, trial). Chained mix64 absorption, in this
// exact order:
//   k = mix64(seed ^ 0x243f6a8885a308d3)
//   k = mix64(k ^ fnv1a64(scenario_id))
//   k = mix64(k ^ (0x9e3779b97f4a7c15 * (sweep_index + 1)))
//   k = mix64(k ^ (0xd1b54a32d192ed03 * (trial_index + 1)))
inline uint64_t derive_stream_key(uint64_t seed, std::string_view scenario_id,
                                  uint64_t sweep_index, uint64_t trial_index) {
  uint64_t k = mix64(seed ^ 0x243f6a8885a308d3ULL);
  k = mix64(k ^ fnv1a64(scenario_id));
  k = mix64(k ^ (0x9e3779b97f4a7c15ULL * (sweep_index + 1)));
  k = mix64(k ^ (0xd1b54a32d192ed03ULL * (trial_index + 1)));
  return k;
}

class RngStream {
 public:
  explicit RngStream(uint64_t key) : key_(key) {}

  uint64_t key() const { return key_; }

  uint64_t next_u64() { return mix64(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased draw from {0, ..., n-1} by rejection.
  uint64_t next_below(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  // Standard real normal via Box-Muller; one spare value is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * pi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * pi * u2);
  }

  // Circularly-symmetric complex normal CN(0, variance): E|z|^2 = variance.
  cplx cnormal(double variance = 1.0) {
    const double s = std::sqrt(variance * 0.5);
    const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return {s * r * std::cos(2.0 * pi * u2), s * r * std::sin(2.0 * pi * u2)};
  }

  cvec cnormal_vector(Eigen::Index n, double variance = 1.0) {
    cvec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = cnormal(variance);
    return v;
  }

 private:
  uint64_t key_ = 0;
  uint64_t counter_ = 0;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace umsim
