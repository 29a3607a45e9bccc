#include "umbra/rng.hpp"

namespace umbra {

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

uint64_t Rng::below(uint64_t bound) {
  if (bound == 0) return 0;
  // Rejection sampling keeps the draw unbiased; the loop terminates almost
  // surely and the accepted sequence is a deterministic function of the seed.
  const uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
  uint64_t v = next_u64();
  while (v >= limit) v = next_u64();
  return v % bound;
}

void Rng::fill(std::span<uint8_t> out) {
  size_t i = 0;
  while (i < out.size()) {
    uint64_t w = next_u64();
    for (int b = 7; b >= 0 && i < out.size(); --b) {
      out[i++] = static_cast<uint8_t>(w >> (8 * b));
    }
  }
}

}  // namespace umbra
