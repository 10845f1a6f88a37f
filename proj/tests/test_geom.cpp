#include "doctest.h"

#include <numbers>

#include "dockeq/assembly.hpp"
#include "dockeq/errors.hpp"
#include "dockeq/geom.hpp"
#include "oracles.hpp"

using namespace dockeq;
constexpr double kPi = std::numbers::pi;

TEST_SUITE("geom")
{
  TEST_CASE("axis-angle hand cases")
  {
    CHECK(axis_angle_to_matrix(Vec3::Zero()).m.isApprox(Mat3::Identity(), 0.0));

    const Mat3 rz = axis_angle_to_matrix(Vec3(0, 0, kPi)).m;
    Mat3 expect = Mat3::Zero();
    expect.diagonal() << -1, -1, 1;
    CHECK((rz - expect).cwiseAbs().maxCoeff() < 1e-12);

    const Vec3 y = axis_angle_to_matrix(Vec3(kPi / 2, 0, 0)) * Vec3(0, 1, 0);
    CHECK((y - Vec3(0, 0, 1)).norm() < 1e-12);
  }

  TEST_CASE("axis-angle round trip")
  {
    CHECK(matrix_to_axis_angle(Rotation::identity()).norm() == 0.0);
    const Vec3 v = Vec3(0.3, -0.5, 0.2).normalized();
    CHECK((matrix_to_axis_angle(axis_angle_to_matrix(v)) - v).norm() < 1e-12);

    const Vec3 pi_z = matrix_to_axis_angle(axis_angle_to_matrix(Vec3(0, 0, kPi)));
    CHECK(std::abs(std::abs(pi_z.z()) - kPi) < 1e-9);
    CHECK(pi_z.head<2>().norm() < 1e-9);

    Rng rng(11);
    for (int k = 0; k < 500; ++k) {
      const double angle = 1e-6 + (kPi - 2e-6) * rng.uniform();
      const Vec3 w = angle * rng.unit_vector();
      CHECK((matrix_to_axis_angle(axis_angle_to_matrix(w)) - w).norm() < 1e-8);
    }
  }

  TEST_CASE("angle-pi branch is deterministic")
  {
    for (const Vec3 axis : {Vec3(1, 2, 3).normalized(), Vec3(-1, 2, 3).normalized(), Vec3(0, -1, 1).normalized()}) {
      const Rotation r = axis_angle_to_matrix(kPi * axis);
      const Vec3 v = matrix_to_axis_angle(r);
      CHECK(std::abs(v.norm() - kPi) < 1e-9);
      CHECK((axis_angle_to_matrix(v).m - r.m).norm() < 1e-8);
      const int first = std::abs(v.x()) > 1e-9 ? 0 : (std::abs(v.y()) > 1e-9 ? 1 : 2);
      CHECK(v[first] > 0.0);
    }
  }

  TEST_CASE("small angles use the series branch accurately")
  {
    for (double a : {1e-12, 1e-8, 5e-5, 2e-4}) {
      const Vec3 w = a * Vec3(1, -2, 0.5).normalized();
      const Mat3 r = axis_angle_to_matrix(w).m;
      CHECK((r * r.transpose() - Mat3::Identity()).norm() < 1e-14);
      CHECK((matrix_to_axis_angle({r}) - w).norm() < 1e-14);
    }
  }

  TEST_CASE("quaternion round trip")
  {
    Rng rng(3);
    for (int k = 0; k < 100; ++k) {
      const Rotation r = rng.uniform_rotation();
      const auto q = r.quaternion();
      CHECK(q[0] >= 0.0);
      CHECK((Rotation::from_quaternion(q[0], q[1], q[2], q[3]).m - r.m).norm() < 1e-14);
    }
    CHECK_THROWS_AS(Rotation::from_quaternion(0, 0, 0, 0), InputError);
  }

  TEST_CASE("apply_action")
  {
    Rng rng(5);
    const auto x = oracle::random_cloud(12, rng);
    const Vec3 c = centroid(x);

    const auto same = apply_action(RigidAction::identity(), x);
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK((same[i] - x[i]).norm() < 1e-12);

    const auto shifted = apply_action({Rotation::identity(), {Vec3(1, 2, 3)}}, x);
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK((shifted[i] - x[i] - Vec3(1, 2, 3)).norm() < 1e-12);

    const RigidAction a{rng.uniform_rotation(), {Vec3(-2, 0.5, 4)}};
    const auto y = apply_action(a, x, c);
    CHECK((centroid(y) - (c + a.tr.v)).norm() < 1e-9);
    const auto z = apply_action({a.rot, {}}, x, c);
    CHECK((centroid(z) - c).norm() < 1e-9);
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < x.size(); ++j)
        CHECK(std::abs((y[i] - y[j]).norm() - (x[i] - x[j]).norm()) < 1e-9);
  }

  TEST_CASE("compose")
  {
    Rng rng(6);
    const auto x = oracle::random_cloud(9, rng);
    const RigidAction a{rng.uniform_rotation(), {3.0 * rng.normal3()}};
    const RigidAction b{rng.uniform_rotation(), {3.0 * rng.normal3()}};

    const auto seq = apply_action(b, apply_action(a, x));
    const auto one = apply_action(compose(b, a), x);
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK((seq[i] - one[i]).norm() < 1e-9);

    const auto id = apply_action(compose(RigidAction::identity(), a), x);
    const auto aa = apply_action(a, x);
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK((id[i] - aa[i]).norm() < 1e-12);

    const auto back = apply_action(compose(a.inverse(), a), x);
    for (std::size_t i = 0; i < x.size(); ++i)
      CHECK((back[i] - x[i]).norm() < 1e-9);

    const RigidAction t1{{}, {Vec3(1, 0, 0)}}, t2{{}, {Vec3(0, 2, 0)}};
    CHECK((compose(t2, t1).tr.v - Vec3(1, 2, 0)).norm() == 0.0);
  }

  TEST_CASE("kabsch agrees with the quaternion oracle")
  {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
      const auto p = oracle::random_cloud(4 + trial % 7, rng);
      auto q = oracle::random_motion(rng)(p);
      for (auto& v : q)
        v += 0.7 * rng.normal3();
      const auto k = kabsch_align(p, q);
      const Mat3 horn = oracle::horn_rotation(p, q);
      CHECK(std::abs(k.rmsd - oracle::aligned_rmsd(p, q, horn)) < 1e-9);
      CHECK((k.rot.m - horn).norm() < 1e-6);
      CHECK(k.rot.m.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("kabsch exact cases")
  {
    Rng rng(8);
    const auto p = oracle::random_cloud(10, rng);
    const auto self = kabsch_align(p, p);
    CHECK(self.rmsd < 1e-9);
    CHECK((self.rot.m - Mat3::Identity()).norm() < 1e-9);

    const auto q = oracle::random_motion(rng)(p);
    CHECK(kabsch_align(p, q).rmsd < 1e-7);

    const RigidAction a{rng.uniform_rotation(), {Vec3(1, -1, 2)}};
    CHECK(kabsch_align(p, apply_action(a, p)).rmsd < 1e-7);

    // mirror image needs the determinant fix
    auto m = p;
    for (auto& v : m)
      v.x() = -v.x();
    const auto mk = kabsch_align(p, m);
    CHECK(mk.rot.m.determinant() == doctest::Approx(1.0));
    CHECK(std::abs(mk.rmsd - oracle::aligned_rmsd(p, m, oracle::horn_rotation(p, m))) < 1e-9);
  }

  TEST_CASE("kabsch brute force on few points")
  {
    Rng rng(9);
    const auto p = oracle::random_cloud(6, rng, 3.0);
    auto q = oracle::random_motion(rng)(p);
    for (auto& v : q)
      v += 0.5 * rng.normal3();
    // coarse random search, then random local refinement with a shrinking step
    Mat3 best_r = Mat3::Identity();
    double best = 1e300;
    for (int k = 0; k < 20000; ++k) {
      const Mat3 r = rng.uniform_rotation().m;
      const double v = oracle::aligned_rmsd(p, q, r);
      if (v < best) {
        best = v;
        best_r = r;
      }
    }
    for (double step = 0.2; step > 1e-5; step *= 0.7)
      for (int k = 0; k < 200; ++k) {
        const Mat3 r = axis_angle_to_matrix(step * rng.normal3()).m * best_r;
        const double v = oracle::aligned_rmsd(p, q, r);
        if (v < best) {
          best = v;
          best_r = r;
        }
      }
    const double r = kabsch_align(p, q).rmsd;
    CHECK(r <= best + 1e-12);
    CHECK(best - r < 1e-3);
  }

  TEST_CASE("kabsch degenerate inputs")
  {
    std::vector<Vec3> same(5, Vec3(1, 2, 3));
    const auto k = kabsch_align(same, same);
    CHECK(k.degenerate);
    CHECK(k.rot.m == Mat3::Identity());

    std::vector<Vec3> line, line2;
    for (int i = 0; i < 5; ++i) {
      line.push_back(Vec3(i, 0, 0));
      line2.push_back(Vec3(0, i, 0) + Vec3(5, 5, 5));
    }
    const auto kl = kabsch_align(line, line2);
    CHECK(kl.degenerate);
    CHECK(kl.rmsd < 1e-9);

    CHECK_THROWS_AS(kabsch_align(std::vector<Vec3>(2), std::vector<Vec3>(2)), InputError);
    CHECK_THROWS_AS(kabsch_align(std::vector<Vec3>(4), std::vector<Vec3>(5)), InputError);
  }

  TEST_CASE("tm-score")
  {
    CHECK(tm_d0(20) == doctest::Approx(1.24 * std::cbrt(5.0) - 1.8).epsilon(1e-15));
    CHECK(tm_d0(20) == doctest::Approx(0.3204).epsilon(1e-3));
    CHECK_THROWS_AS(tm_d0(15), InputError);

    const double d0 = tm_d0(30);
    std::vector<double> d(30, d0);
    CHECK(tm_from_distances(d, d0) == doctest::Approx(0.5));

    Rng rng(10);
    const auto p = oracle::random_cloud(30, rng);
    CHECK(tm_score_points(p, p).score == doctest::Approx(1.0).epsilon(1e-12));
    const auto m = oracle::random_motion(rng);
    CHECK(tm_score_points(m(p), p).score == doctest::Approx(1.0).epsilon(1e-9));

    auto q = p;
    for (auto& v : q)
      v += 2.0 * rng.normal3();
    const double base = tm_score_points(q, p).score;
    const auto m2 = oracle::random_motion(rng);
    CHECK(std::abs(tm_score_points(m2(q), m2(p)).score - base) < 1e-9);
    CHECK(base > 0.0);
    CHECK(base < 1.0);
  }
}

TEST_SUITE("assembly")
{
  TEST_CASE("complex rmsd hand computation")
  {
    // two 2-residue chains; moving chain B by 2 A along x is partly absorbed
    // by the optimal superposition
    AssemblyState s;
    s.chains.push_back({"A", {Vec3(0, 0, 0), Vec3(0, 4, 0)}, {20, 20}});
    s.chains.push_back({"B", {Vec3(6, 0, 1), Vec3(6, 4, -1)}, {20, 20}});
    s.fixed_index = 0;
    AssemblyState moved = s;
    for (auto& v : moved.chains[1].coords)
      v.x() += 2.0;
    const double r = complex_rmsd(moved, s);
    // oracle: Horn superposition on the four points
    const auto p = moved.concatenated();
    const auto q = s.concatenated();
    CHECK(r == doctest::Approx(oracle::aligned_rmsd(p, q, oracle::horn_rotation(p, q))).epsilon(1e-10));
    CHECK(r <= 1.0 + 1e-12); // translating by 1 A alone already gives 1

    CHECK(complex_rmsd(s, s) < 1e-9);
  }

  TEST_CASE("metrics invariance and mismatch errors")
  {
    Rng rng(12);
    const auto s = oracle::toy_assembly(3, 8, rng);
    const auto moved = apply_motion(oracle::random_motion(rng), s);
    CHECK(complex_rmsd(moved, s) < 1e-7);
    CHECK(tm_score(s, s) == doctest::Approx(1.0).epsilon(1e-12));

    auto bad = s;
    bad.chains[1].coords.pop_back();
    bad.chains[1].restypes.pop_back();
    try {
      complex_rmsd(bad, s);
      FAIL("expected an error");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find("'B'") != std::string::npos);
    }
  }

  TEST_CASE("relative action recovers the applied action")
  {
    Rng rng(13);
    const auto s = oracle::toy_assembly(2, 10, rng);
    const RigidAction a{rng.uniform_rotation(), {Vec3(1, 2, 3)}};
    ChainStructure moved = s.chains[1];
    moved.coords = apply_action(a, moved.coords);
    const RigidAction r = relative_action(s.chains[1], moved);
    CHECK((r.rot.m - a.rot.m).norm() < 1e-9);
    CHECK((r.tr.v - a.tr.v).norm() < 1e-9);
  }

  TEST_CASE("validation")
  {
    AssemblyState s;
    s.chains.push_back({"A", {Vec3(0, 0, 0)}, {0}});
    CHECK_THROWS_AS(s.validate(), InputError);
    s.chains.push_back({"B", {Vec3(1, 0, 0)}, {0, 1}});
    CHECK_THROWS_AS(s.validate(), InputError);
    s.chains[1].restypes = {1};
    s.chains[1].coords[0].x() = std::nan("");
    CHECK_THROWS_AS(s.validate(), InputError);
    CHECK(default_fixed_index({{"A", {Vec3::Zero()}, {0}}, {"B", {Vec3::Zero(), Vec3::Zero()}, {0, 0}}}) == 1);
    CHECK(default_fixed_index({{"A", {Vec3::Zero()}, {0}}, {"B", {Vec3::Zero()}, {0}}}) == 0);
  }

  TEST_CASE("normalize puts the fixed chain at the origin")
  {
    Rng rng(14);
    auto s = oracle::toy_assembly(3, 5, rng);
    s = apply_motion({Mat3::Identity(), Vec3(10, 20, 30)}, s);
    s.fixed_index = 2;
    s.normalize();
    CHECK(s.chains[2].centroid().norm() < 1e-12);
  }
}

TEST_SUITE("rng")
{
  TEST_CASE("reproducible and splittable")
  {
    Rng a(42), b(42);
    for (int k = 0; k < 10; ++k)
      CHECK(a.next_u64() == b.next_u64());
    Rng c(42);
    Rng s1 = c.split(1), s1b = c.split(1), s2 = c.split(2);
    CHECK(s1.next_u64() == s1b.next_u64());
    CHECK(Rng(42).split(1).next_u64() != s2.next_u64());
  }

  TEST_CASE("moments")
  {
    Rng r(1);
    const int n = 200000;
    double su = 0, sn = 0, sn2 = 0;
    for (int k = 0; k < n; ++k) {
      const double u = r.uniform();
      CHECK_UNARY(u >= 0.0);
      CHECK_UNARY(u < 1.0);
      su += u;
      const double z = r.normal();
      sn += z;
      sn2 += z * z;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
    CHECK(std::abs(sn / n) < 0.01);
    CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
  }

  TEST_CASE("uniform rotations have the Haar angle law")
  {
    // angle density (1 - cos w) / pi, mean = pi/2 + 2/pi
    Rng r(2);
    const int n = 100000;
    double mean = 0.0;
    for (int k = 0; k < n; ++k)
      mean += rotation_angle(r.uniform_rotation());
    CHECK(mean / n == doctest::Approx(kPi / 2 + 2 / kPi).epsilon(0.01));
  }
}
