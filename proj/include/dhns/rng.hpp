#pragma once

#include <array>
#include <cstdint>

#include "dhns/types.hpp"

namespace dhns {

// Deterministic random stream.
//
// Bits come from xoshiro256** (Blackman & Vigna), its 256-bit state filled
// from the 64-bit seed by SplitMix64. Seeding is a handful of multiplies, so
// per-triple substreams are cheap. Everything layered on top is implemented
// here rather than through <random> distributions, whose algorithms are
// implementation-defined; the same seed yields the same stream everywhere.
//
//   uniform(): top 53 bits scaled to [0, 1)
//   below(n):  rejection sampling on the top bits, unbiased
//   normal():  256-layer ziggurat (Marsaglia & Tsang, with Doornik's
//              wedge test), one 64-bit draw on the fast path
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::uint64_t below(std::uint64_t n);
  double normal();
  Vec normal_vec(Eigen::Index n);

  // Independent stream keyed by (this stream's seed, tags...). Does not
  // advance this stream.
  Rng substream(std::uint64_t tag) const;
  Rng substream(std::uint64_t tag_a, std::uint64_t tag_b) const;
  Rng substream(std::uint64_t tag_a, std::uint64_t tag_b, std::uint64_t tag_c) const;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_;
};

// SplitMix64 finalizer; used to derive substream seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace dhns
