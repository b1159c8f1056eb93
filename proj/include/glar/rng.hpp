#pragma once

#include <cstdint>
#include <random>

namespace glar {

// Deterministic random stream.
//
// Every stochastic choice in the pipeline (init, shuffles, negative sampling,
// clustering seeds) draws from one of these, forked from a base seed with a
// documented salt. Forking uses splitmix64 so streams for different salts are
// independent and, crucially, independent of evaluation order and thread
// count: the stream for (epoch e, query q) is the same no matter which worker
// touches it. We deliberately avoid std::uniform_*_distribution — their
// algorithms are implementation-defined, and outputs must be reproducible.
class RngStream {
 public:
  explicit RngStream(uint64_t seed) : base_(seed), gen_(splitmix64(seed)) {}

  uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1): top 53 bits, the exact-double construction.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [0, n). Modulo bias is < n / 2^64, irrelevant at our sizes.
  uint64_t below(uint64_t n) { return next_u64() % n; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Child stream for a named purpose. Deterministic in (base seed, salt).
  RngStream fork(uint64_t salt) const {
    return RngStream(splitmix64(base_ ^ (0x9e3779b97f4a7c15ULL + salt * 0xbf58476d1ce4e5b9ULL)));
  }

  static uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  uint64_t base_;
  std::mt19937_64 gen_;
};

}  // namespace glar
