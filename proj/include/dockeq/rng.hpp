#pragma once

#include <cstdint>
#include <random>

#include "dockeq/geom.hpp"

namespace dockeq {

/// SplitMix64 finaliser, used to derive seeds for independent streams.
std::uint64_t splitmix64(std::uint64_t x);

/// Seedable, splittable generator: std::mt19937_64 streams whose seeds are
/// derived with SplitMix64. Uniform and normal variates are produced by
/// explicit formulas (53-bit mantissa; Box-Muller) rather than the
/// implementation-defined std distributions, so streams are reproducible
/// across standard libraries.
class Rng
{
public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  /// Independent child stream number `stream`. Does not advance this stream.
  Rng split(std::uint64_t stream) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform();
  double normal();
  Vec3 normal3();
  Vec3 unit_vector();
  /// Haar-uniform rotation from a normalised 4D Gaussian quaternion.
  Rotation uniform_rotation();

private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

} // namespace dockeq
