#include "doctest.h"

#include <sstream>

#include "dockeq/errors.hpp"
#include "dockeq/sampler.hpp"
#include "oracles.hpp"

using namespace dockeq;

namespace {

const NoiseSchedule& sched()
{
  static const NoiseSchedule s{};
  return s;
}

const igso3::Table& table()
{
  static const igso3::Table t = igso3::Table::build(sched().rot_sigma_grid(48), 1024, 2000);
  return t;
}

/// 0.5 k |c - target|^2 on the centroid of chain 1; Gibbs translation score is
/// -k (c - target) / T.
class Harmonic final : public Potential
{
public:
  Harmonic(double k, Vec3 target) : k_(k), target_(target) {}
  double evaluate(const AssemblyState& s) const override
  {
    return 0.5 * k_ * (s.chains[1].centroid() - target_).squaredNorm();
  }
  bool coordinate_gradient(const AssemblyState& s, std::size_t chain, std::vector<Vec3>& out) const override
  {
    out.assign(s.chains[chain].size(), Vec3::Zero());
    if (chain == 1) {
      const Vec3 g = k_ * (s.chains[1].centroid() - target_) / double(s.chains[1].size());
      for (auto& v : out)
        v = g;
    }
    return true;
  }

private:
  double k_;
  Vec3 target_;
};

AssemblyState shifted_mode(const AssemblyState& m, std::size_t chain, const Vec3& shift, const Vec3& rot)
{
  JointAction a = JointAction::identity(m.num_chains());
  a.actions[chain] = {axis_angle_to_matrix(rot), {shift}};
  return apply_joint(a, m);
}

double max_diff(const JointTangent& a, const JointTangent& b)
{
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max({m, (a.v[i].omega - b.v[i].omega).norm(), (a.v[i].vel - b.v[i].vel).norm()});
  return m;
}

double energy_distance(const std::vector<double>& d, const std::vector<int>& label, std::size_t n)
{
  double sxy = 0, sxx = 0, syy = 0;
  std::size_t nx = 0;
  for (int l : label)
    nx += l == 0;
  const std::size_t ny = n - nx;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = d[i * n + j];
      if (label[i] != label[j])
        sxy += v;
      else if (label[i] == 0)
        sxx += v;
      else
        syy += v;
    }
  return 2.0 * sxy / double(nx * ny) - 2.0 * sxx / double(nx * nx) - 2.0 * syy / double(ny * ny);
}

} // namespace

TEST_SUITE("sampler")
{
  TEST_CASE("dsm loss: cheating oracle is zero, zero field is about one per component")
  {
    Rng rng(81);
    std::vector<AssemblyState> data;
    for (int k = 0; k < 3; ++k)
      data.push_back(oracle::toy_assembly(3, 5, rng));
    std::vector<double> ts;
    for (int k = 1; k <= 10; ++k)
      ts.push_back(0.1 * k);

    const PerturbationScore cheat = [&](const Perturbation& p, std::size_t d, double t) {
      return kernel_score(p.applied, data[d].fixed_index, t, table(), sched());
    };
    CHECK(dsm_loss(cheat, data, ts, table(), sched(), rng) == 0.0);

    // 3 data x 10 times x 340 repeats ~ 10^4 draws, 2 mobile chains x 2 components
    const double zero = dsm_loss(ZeroScore(), data, ts, table(), sched(), rng, 340);
    CHECK(zero == doctest::Approx(4.0).epsilon(0.1));
    CHECK_THROWS_AS(dsm_loss(ZeroScore(), data, std::vector<double>{0.0}, table(), sched(), rng), InputError);
  }

  TEST_CASE("single mode oracle on its own data point has zero loss")
  {
    Rng rng(82);
    const auto mode = oracle::toy_assembly(3, 6, rng);
    const MixtureOracle o({mode}, {1.0}, table(), sched());
    std::vector<double> ts{0.05, 0.2, 0.5, 0.8, 1.0};
    const double l = dsm_loss(o, std::vector<AssemblyState>{mode}, ts, table(), sched(), rng, 20);
    CHECK(l < 1e-8);
  }

  TEST_CASE("K=1: zero at the mode, kernel score elsewhere")
  {
    Rng rng(83);
    const auto mode = oracle::toy_assembly(3, 6, rng);
    const MixtureOracle o({mode}, {2.5}, table(), sched());
    CHECK(o.weights()[0] == 1.0);
    for (double t : {0.1, 0.5, 1.0}) {
      CHECK(o.score(mode, t).max_norm() == 0.0);
      const Perturbation p = perturb(mode, t, table(), sched(), rng);
      const auto k = kernel_score(p.applied, mode.fixed_index, t, table(), sched());
      CHECK(max_diff(o.score(p.state, t), k) < 1e-8 * std::max(1.0, k.max_norm()));
    }
  }

  TEST_CASE("K=2 saturation far from the second mode")
  {
    Rng rng(84);
    const auto m1 = oracle::toy_assembly(2, 8, rng);
    const auto m2 = shifted_mode(m1, 1, Vec3(25, -20, 30), Vec3(0, 1.5, 0));
    const MixtureOracle two({m1, m2}, {1.0, 1.0}, table(), sched());
    const MixtureOracle one({m1}, {1.0}, table(), sched());
    for (double t : {0.1, 0.2, 0.3}) {
      const Perturbation p = perturb(m1, t, table(), sched(), rng);
      CHECK(two.responsibilities(p.state, t)[0] == doctest::Approx(1.0));
      CHECK(max_diff(two.score(p.state, t), one.score(p.state, t)) < 1e-6);
    }
  }

  TEST_CASE("mixture score matches finite differences of log density")
  {
    Rng rng(85);
    const double h = 1e-5;
    double worst = 0.0;
    for (int rep = 0; rep < 3; ++rep) {
      const auto m1 = oracle::toy_assembly(3, 6, rng);
      const auto m2 = shifted_mode(m1, 2, 0.3 * rng.normal3(), 0.3 * rng.normal3());
      const MixtureOracle o({m1, m2}, {0.4, 0.6}, table(), sched());
      for (double t : {0.3, 0.6, 0.9}) {
        const AssemblyState s = perturb(m1, t, table(), sched(), rng).state;
        const JointTangent sc = o.score(s, t);
        for (std::size_t i = 1; i < 3; ++i)
          for (int k = 0; k < 6; ++k) {
            TangentVector e;
            if (k < 3)
              e.omega[k] = 1.0;
            else
              e.vel[k - 3] = 1.0;
            const double fd =
                (o.log_density(move_chain(s, i, e, h), t) - o.log_density(move_chain(s, i, e, -h), t)) / (2 * h);
            const double an = k < 3 ? sc.v[i].omega[k] : sc.v[i].vel[k - 3];
            worst = std::max(worst, std::abs(an - fd) / std::max(1.0, std::abs(fd)));
          }
      }
    }
    CHECK(worst < 1e-3);
  }

  TEST_CASE("oracle score is equivariant")
  {
    Rng rng(86);
    const auto m1 = oracle::toy_assembly(3, 6, rng);
    const auto m2 = shifted_mode(m1, 1, Vec3(1, 2, 0), Vec3(0.2, 0, 0.3));
    const auto mv = oracle::random_motion(rng);
    const MixtureOracle o({m1, m2}, {0.5, 0.5}, table(), sched());
    const MixtureOracle om({apply_motion(mv, m1), apply_motion(mv, m2)}, {0.5, 0.5}, table(), sched());
    for (double t : {0.2, 0.5, 0.8}) {
      const AssemblyState s = perturb(m2, t, table(), sched(), rng).state;
      const JointTangent a = o.score(s, t);
      const JointTangent b = om.score(apply_motion(mv, s), t);
      double worst = 0.0;
      for (std::size_t i = 0; i < 3; ++i) {
        worst = std::max(worst, (mv.rot * a.v[i].omega - b.v[i].omega).norm());
        worst = std::max(worst, (mv.rot * a.v[i].vel - b.v[i].vel).norm());
      }
      CHECK(worst < 1e-6 * std::max(1.0, a.max_norm()));
    }
  }

  TEST_CASE("oracle errors")
  {
    Rng rng(87);
    const auto m = oracle::toy_assembly(2, 4, rng);
    CHECK_THROWS_AS(MixtureOracle({}, {}, table(), sched()), InputError);
    CHECK_THROWS_AS(MixtureOracle({m}, {0.0}, table(), sched()), InputError);
    CHECK_THROWS_AS(MixtureOracle({m}, {1.0, 2.0}, table(), sched()), InputError);
    const MixtureOracle o({m}, {1.0}, table(), sched());
    const auto other = oracle::toy_assembly(2, 5, rng);
    CHECK_THROWS_AS(o.score(other, 0.5), InputError);
    CHECK_THROWS_AS(o.score(m, 0.0), InputError);
  }

  TEST_CASE("Gibbs score on a harmonic toy")
  {
    Rng rng(88);
    const auto s = oracle::toy_assembly(2, 5, rng);
    const Vec3 target(1.0, -2.0, 0.5);
    const double k = 0.7, temp = 1.3;
    const Harmonic f(k, target);
    const PotentialScoreField field(f, temp);
    const auto sc = field.score(s, 0.5);
    const Vec3 expect = -k * (s.chains[1].centroid() - target) / temp;
    CHECK((sc.v[1].vel - expect).norm() < 1e-6);
    CHECK(sc.v[1].omega.norm() < 1e-6);
    CHECK(sc.v[0].vel.norm() == 0.0);
    CHECK_THROWS_AS(PotentialScoreField(f, 0.0), InputError);
  }

  TEST_CASE("zero score without noise returns the initial state")
  {
    Rng rng(89);
    const auto s = oracle::toy_assembly(3, 5, rng);
    SamplerConfig cfg;
    cfg.stochastic = false;
    const auto traj = reverse_diffuse(ZeroScore(), s, s, cfg, sched(), rng);
    CHECK(traj.states.size() == 51);
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(traj.final_state().chains[i].coords == s.chains[i].coords);
  }

  TEST_CASE("fixed chain is never moved by reverse diffusion")
  {
    Rng rng(90);
    const auto s = oracle::toy_assembly(3, 5, rng);
    const MixtureOracle o({s}, {1.0}, table(), sched());
    SamplerConfig cfg;
    const auto traj = reverse_diffuse(o, s, std::nullopt, cfg, sched(), rng);
    for (const auto& st : traj.states)
      CHECK(st.chains[0].coords == s.chains[0].coords);
  }

  TEST_CASE("single mode recovery and determinism")
  {
    Rng rng(91);
    const auto mode = oracle::toy_assembly(2, 10, rng);
    const MixtureOracle o({mode}, {1.0}, table(), sched());
    SamplerConfig cfg;
    cfg.n_samples = 40;
    cfg.seed = 17;
    const auto a = sample_equilibria(o, mode, cfg, sched());
    REQUIRE(a.runs.size() == 40);
    int near = 0;
    for (const auto& r : a.runs)
      near += complex_rmsd(r.final_state(), mode) < 1.0;
    CHECK(near >= 38);
    REQUIRE(!a.clusters.empty());
    CHECK(a.clusters.front().count() >= 38);

    const auto b = sample_equilibria(o, mode, cfg, sched());
    for (std::size_t k = 0; k < 40; ++k)
      CHECK(a.runs[k].final_state().chains[1].coords == b.runs[k].final_state().chains[1].coords);

    SamplerConfig one = cfg;
    one.n_samples = 1;
    const auto c = sample_equilibria(o, mode, one, sched());
    Rng r0 = Rng(cfg.seed).split(0);
    const auto d = reverse_diffuse(o, mode, std::nullopt, one, sched(), r0);
    CHECK(c.runs[0].final_state().chains[1].coords == d.final_state().chains[1].coords);
  }

  TEST_CASE("two modes are both recovered")
  {
    Rng rng(92);
    const auto m1 = oracle::toy_assembly(2, 10, rng);
    const auto m2 = shifted_mode(m1, 1, Vec3(0, 24, 0), Vec3(0, 0, 1.0));
    const MixtureOracle o({m1, m2}, {1.0, 1.0}, table(), sched());
    SamplerConfig cfg;
    cfg.n_samples = 60;
    cfg.seed = 5;
    const auto set = sample_equilibria(o, shifted_mode(m1, 1, Vec3(0, 12, 0), Vec3::Zero()), cfg, sched());
    int c1 = 0, c2 = 0;
    for (const auto& r : set.runs) {
      c1 += complex_rmsd(r.final_state(), m1) < 1.0;
      c2 += complex_rmsd(r.final_state(), m2) < 1.0;
    }
    CHECK(c1 + c2 >= 57);
    CHECK(c1 >= 12);
    CHECK(c2 >= 12);
  }

  TEST_CASE("prior and forward perturbation agree at t=1 (energy distance)")
  {
    Rng rng(93);
    const auto mode = oracle::toy_assembly(2, 6, rng, 4.0);
    const std::size_t per = 1000;
    std::vector<Vec3> pts;
    for (std::size_t k = 0; k < per; ++k)
      pts.push_back(perturb(mode, 1.0, table(), sched(), rng).state.chains[1].centroid());
    for (std::size_t k = 0; k < per; ++k)
      pts.push_back(sample_prior(mode, sched(), rng).chains[1].centroid());
    const std::size_t n = pts.size();
    std::vector<double> d(n * n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        d[i * n + j] = (pts[i] - pts[j]).norm();
    std::vector<int> label(n, 1);
    std::fill(label.begin(), label.begin() + per, 0);
    const double stat = energy_distance(d, label, n);
    int above = 0;
    const int perms = 999;
    std::mt19937_64 eng(7);
    for (int p = 0; p < perms; ++p) {
      std::shuffle(label.begin(), label.end(), eng);
      above += energy_distance(d, label, n) >= stat;
    }
    const double pval = (above + 1.0) / (perms + 1.0);
    CHECK(pval > 0.001);
  }

  TEST_CASE("diffusion trajectory json lines")
  {
    Rng rng(94);
    const auto s = oracle::toy_assembly(2, 4, rng);
    SamplerConfig cfg;
    cfg.n_steps = 4;
    const auto traj = reverse_diffuse(ZeroScore(), s, std::nullopt, cfg, sched(), rng);
    std::ostringstream os;
    write_diffusion_jsonl(traj, s.fixed_index, os, nullptr);
    std::istringstream is(os.str());
    std::string line;
    int n = 0;
    while (std::getline(is, line)) {
      const auto j = nlohmann::json::parse(line);
      CHECK(j.at("actions").size() == 1);
      CHECK(j.at("potential").is_null());
      ++n;
    }
    CHECK(n == 5);
  }
}
