#include "dockeq/rng.hpp"

#include <cmath>
#include <numbers>

namespace dockeq {

std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Rng Rng::split(std::uint64_t stream) const
{
  return Rng(splitmix64(seed_ ^ splitmix64(stream + 0x5851f42d4c957f2dULL)));
}

double Rng::uniform()
{
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal()
{
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0)
    u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(phi);
  has_spare_ = true;
  return r * std::cos(phi);
}

Vec3 Rng::normal3()
{
  const double x = normal();
  const double y = normal();
  const double z = normal();
  return {x, y, z};
}

Vec3 Rng::unit_vector()
{
  for (;;) {
    const Vec3 v = normal3();
    const double n = v.norm();
    if (n > 1e-12)
      return v / n;
  }
}

Rotation Rng::uniform_rotation()
{
  for (;;) {
    const double w = normal();
    const double x = normal();
    const double y = normal();
    const double z = normal();
    if (w * w + x * x + y * y + z * z > 1e-20)
      return Rotation::from_quaternion(w, x, y, z);
  }
}

} // namespace dockeq
