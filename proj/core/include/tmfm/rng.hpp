#pragma once

// xoshiro256** seeded through SplitMix64 from (seed, stream). Normals come from
// the Marsaglia polar method, so a fixed (seed, stream) reproduces every draw
// on any platform with IEEE doubles.

#include <cstdint>

namespace tmfm {

class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0, std::uint64_t stream = 0);

  std::uint64_t next();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double a, double b);
  double normal();
  /// Uniform integer in [0, n), rejection sampled (no modulo bias).
  std::uint64_t below(std::uint64_t n);

  /// Independent generator derived from this one's seed material and a tag.
  /// Does not advance this generator.
  Rng substream(std::uint64_t tag) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace tmfm
