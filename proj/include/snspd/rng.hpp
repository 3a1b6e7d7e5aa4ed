#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace snspd {

// Philox4x32-10 counter-based generator. Pure function of (key, counter), so
// any draw can be addressed directly and streams can be split without
// coordination. Verified against the reference known-answer vectors.
struct Philox4x32 {
  static constexpr uint32_t kM0 = 0xD2511F53u;
  static constexpr uint32_t kM1 = 0xCD9E8D57u;
  static constexpr uint32_t kW0 = 0x9E3779B9u;
  static constexpr uint32_t kW1 = 0xBB67AE85u;

  struct Block {
    uint32_t x[4];
  };

  static Block block(uint32_t k0, uint32_t k1, uint32_t c0, uint32_t c1,
                     uint32_t c2, uint32_t c3) {
    uint32_t x0 = c0, x1 = c1, x2 = c2, x3 = c3;
    for (int round = 0; round < 10; ++round) {
      uint64_t p0 = static_cast<uint64_t>(kM0) * x0;
      uint64_t p1 = static_cast<uint64_t>(kM1) * x2;
      uint32_t hi0 = static_cast<uint32_t>(p0 >> 32);
      uint32_t lo0 = static_cast<uint32_t>(p0);
      uint32_t hi1 = static_cast<uint32_t>(p1 >> 32);
      uint32_t lo1 = static_cast<uint32_t>(p1);
      uint32_t n0 = hi1 ^ x1 ^ k0;
      uint32_t n1 = lo1;
      uint32_t n2 = hi0 ^ x3 ^ k1;
      uint32_t n3 = lo0;
      x0 = n0;
      x1 = n1;
      x2 = n2;
      x3 = n3;
      k0 += kW0;
      k1 += kW1;
    }
    return Block{{x0, x1, x2, x3}};
  }
};

// Substream purposes. Every random draw in the pipeline is addressed by
// (seed, purpose, stream index, draw index); nothing draws from shared state,
// so evaluation order and thread count never change results.
enum class Stream : uint32_t {
  arrivals_signal = 1,
  arrivals_dark = 2,
  dark_wavelength = 3,
  jitter = 4,
  sample_noise = 5,
  nn_init = 6,
  nn_shuffle = 7,
  bias_sweep = 8,
  emitter_cycle = 9,
  row_jitter = 10,
  row_noise = 11,
  calib_jitter = 12,
  calib_noise = 13,
  det_jitter = 14,
  det_noise = 15,
};

class CounterRng {
 public:
  CounterRng(uint64_t seed, Stream purpose, uint64_t index = 0)
      : key0_(static_cast<uint32_t>(seed)),
        key1_(static_cast<uint32_t>(seed >> 32)),
        stream_((static_cast<uint64_t>(purpose) << 32) | (index & 0xFFFFFFFFu)) {}

  // Random 64-bit word at an absolute draw index (two per Philox block).
  uint64_t u64_at(uint64_t draw) const {
    uint64_t blk = draw >> 1;
    auto b = Philox4x32::block(key0_, key1_, static_cast<uint32_t>(blk),
                               static_cast<uint32_t>(blk >> 32),
                               static_cast<uint32_t>(stream_),
                               static_cast<uint32_t>(stream_ >> 32));
    if ((draw & 1) == 0)
      return (static_cast<uint64_t>(b.x[1]) << 32) | b.x[0];
    return (static_cast<uint64_t>(b.x[3]) << 32) | b.x[2];
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform_at(uint64_t draw) const {
    return static_cast<double>(u64_at(draw) >> 11) * 0x1.0p-53;
  }

  // Standard normal addressed by index; consumes uniform draws 2i and 2i+1
  // (Box-Muller, cosine branch).
  double normal_at(uint64_t i) const {
    double u0 = uniform_at(2 * i);
    double u1 = uniform_at(2 * i + 1);
    double r = std::sqrt(-2.0 * std::log1p(-u0));
    return r * std::cos(2.0 * 3.14159265358979323846 * u1);
  }

  // Sequential interface for stream-like use (arrival gaps, shuffles, ...).
  uint64_t next_u64() { return u64_at(cursor_++); }
  double uniform() { return uniform_at(cursor_++); }
  double normal() {
    double u0 = uniform();
    double u1 = uniform();
    double r = std::sqrt(-2.0 * std::log1p(-u0));
    return r * std::cos(2.0 * 3.14159265358979323846 * u1);
  }
  double exponential() { return -std::log1p(-uniform()); }

  // Poisson count by summing unit-rate exponential gaps. Exact and stable for
  // the lambdas used here (up to ~1e4).
  uint64_t poisson(double lambda) {
    uint64_t k = 0;
    double acc = 0.0;
    while (true) {
      acc += exponential();
      if (acc > lambda) return k;
      ++k;
    }
  }

  uint64_t cursor() const { return cursor_; }

 private:
  uint32_t key0_;
  uint32_t key1_;
  uint64_t stream_;
  uint64_t cursor_ = 0;
};

// Fisher-Yates shuffle driven by one substream; deterministic given the rng.
template <class T>
void shuffle(std::vector<T>& v, CounterRng& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng.next_u64() % i);
    std::swap(v[i - 1], v[j]);
  }
}

// splitmix64 step; used to derive per-study sub-seeds from the master seed.
inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace snspd
