#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace umbra {

uint64_t splitmix64(uint64_t x);

/// Deterministic random source. Wraps std::mt19937_64 (whose output sequence
/// the standard pins down exactly) but draws integers and doubles with its own
/// routines, because std::uniform_int_distribution and friends are
/// implementation-defined and would break byte-identical output across
/// toolchains.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, bound). bound must be nonzero.
  uint64_t below(uint64_t bound);

  /// Uniform in [lo, hi] inclusive.
  uint64_t between(uint64_t lo, uint64_t hi) { return lo + below(hi - lo + 1); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool chance(double p) { return unit() < p; }

  /// Fills the span with bytes, big-endian within each 8-byte word.
  void fill(std::span<uint8_t> out);

 private:
  std::mt19937_64 gen_;
};

/// Independent stream as a pure function of (seed, stream); stream i of seed s
/// is the same no matter how many other streams were derived before it.
inline Rng derive_rng(uint64_t seed, uint64_t stream) {
  return Rng(splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ULL)));
}

}  // namespace umbra
