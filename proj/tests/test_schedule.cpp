#include "doctest.h"

#include "dockeq/errors.hpp"
#include "dockeq/potential.hpp"
#include "dockeq/schedule.hpp"
#include "oracles.hpp"

using namespace dockeq;

namespace {

const igso3::Table& table()
{
  static const igso3::Table t = igso3::Table::build(NoiseSchedule{}.rot_sigma_grid(48), 1024);
  return t;
}

} // namespace

TEST_SUITE("schedule")
{
  TEST_CASE("sigma endpoints and geometric midpoint")
  {
    const NoiseSchedule s;
    CHECK(s.sigma_at(Component::tr, 0.0) == doctest::Approx(0.01));
    CHECK(s.sigma_at(Component::tr, 1.0) == doctest::Approx(25.0));
    CHECK(s.sigma_at(Component::tr, 0.5) == doctest::Approx(std::sqrt(0.01 * 25.0)));
    CHECK(s.sigma_at(Component::rot, 1.0) == doctest::Approx(1.65));
  }

  TEST_CASE("g2 is the time derivative of the kernel variance")
  {
    const NoiseSchedule s;
    for (double t : {0.1, 0.5, 0.9}) {
      const double h = 1e-6;
      auto var = [&](Component c, double u) { return std::pow(s.sigma_at(c, u), 2); };
      const double dtr = (var(Component::tr, t + h) - var(Component::tr, t - h)) / (2 * h);
      const double drot = (var(Component::rot, t + h) - var(Component::rot, t - h)) / (2 * h);
      CHECK(s.g2(Component::tr, t) == doctest::Approx(dtr).epsilon(1e-6));
      CHECK(s.g2(Component::rot, t) == doctest::Approx(2.0 * drot).epsilon(1e-6));
    }
  }

  TEST_CASE("validation")
  {
    NoiseSchedule s;
    s.sigma_min_tr = 30.0;
    CHECK_THROWS_AS(s.validate(), InputError);
  }

  TEST_CASE("perturb leaves the fixed chain alone and moves centroids by r")
  {
    Rng rng(31);
    const auto s = oracle::toy_assembly(3, 6, rng);
    Rng r2(5);
    const auto p = perturb(s, 0.5, table(), NoiseSchedule{}, r2);
    CHECK(p.state.chains[0].coords == s.chains[0].coords);
    CHECK(p.applied.actions[0].is_identity());
    for (std::size_t i = 1; i < 3; ++i)
      CHECK((p.state.chains[i].centroid() - s.chains[i].centroid() - p.applied.actions[i].tr.v).norm() < 1e-9);
  }

  TEST_CASE("kernel score equals finite differences of the log kernel density")
  {
    Rng rng(32);
    const NoiseSchedule sched;
    const auto s = oracle::toy_assembly(3, 5, rng);
    for (double t : {0.2, 0.5, 0.9}) {
      Rng r(7);
      const auto p = perturb(s, t, table(), sched, r);
      const JointTangent k = kernel_score(p.applied, s.fixed_index, t, table(), sched);
      for (std::size_t i = 1; i < 3; ++i)
        for (int c = 0; c < 6; ++c) {
          TangentVector e;
          (c < 3 ? e.omega : e.vel)[c % 3] = 1.0;
          const double h = 1e-5;
          auto moved = [&](double step) {
            JointAction a = p.applied;
            a.actions[i] = compose({axis_angle_to_matrix(step * e.omega), {step * e.vel}}, a.actions[i]);
            return log_kernel_density(a, s.fixed_index, t, sched);
          };
          const double fd = (moved(h) - moved(-h)) / (2 * h);
          const double an = c < 3 ? k.v[i].omega[c] : k.v[i].vel[c - 3];
          CHECK(std::abs(an - fd) <= 1e-3 * std::max(1.0, std::abs(fd)));
        }
    }
  }
}
