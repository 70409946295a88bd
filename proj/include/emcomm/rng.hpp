#pragma once

#include <cstdint>
#include <span>

namespace emcomm {

// Deterministic PRNG (splitmix64-seeded xoshiro256**) with explicit
// distribution mappings, so streams reproduce bit-identically regardless
// of the standard library in use. Copyable: a copy replays the same
// stream from the point of the copy.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  double uniform01();  // [0, 1)
  double uniform(double lo, double hi);
  double gaussian();  // standard normal, Marsaglia polar method
  double gaussian(double mean, double stddev);
  // Index draw from an (assumed normalized) probability vector.
  int categorical(std::span<const double> probs);

  // Independent child stream. Derived from the construction seed only, so
  // split(k) yields the same stream no matter how much the parent has drawn.
  Rng split(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace emcomm
