#include "dockeq/synthetic.hpp"

#include <algorithm>
#include <cmath>

#include "dockeq/errors.hpp"

namespace dockeq {

namespace {

constexpr double kBond = 3.8;

bool clashes(const PointCloud& x, const Vec3& p, double min_gap)
{
  // the last point is the bonded neighbour
  for (std::size_t k = 0; k + 1 < x.size(); ++k)
    if ((x[k] - p).norm() < min_gap)
      return true;
  return false;
}

} // namespace

ChainStructure random_chain(std::size_t residues, Rng& rng, const std::string& id, double min_gap)
{
  if (residues < 1)
    throw InputError("random_chain: need at least one residue");
  // pull toward the origin scales with the expected radius of a globule
  const double radius = 2.2 * std::pow(static_cast<double>(residues), 0.38) + 2.0;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    PointCloud x{Vec3::Zero()};
    bool ok = true;
    while (ok && x.size() < residues) {
      ok = false;
      for (int trial = 0; trial < 200; ++trial) {
        const Vec3& last = x.back();
        Vec3 dir = rng.normal3();
        const double r = last.norm();
        if (r > 1e-9)
          dir -= 1.5 * std::max(0.0, r / radius - 0.5) * last / r;
        if (dir.norm() < 1e-9)
          continue;
        const Vec3 p = last + kBond * dir.normalized();
        if (!clashes(x, p, min_gap)) {
          x.push_back(p);
          ok = true;
          break;
        }
      }
    }
    if (!ok)
      continue;
    const Vec3 c = centroid(x);
    for (auto& p : x)
      p -= c;
    return {id, std::move(x), std::vector<int>(residues, kUnknownResidue)};
  }
  throw NumericalError("random_chain: could not grow a self-avoiding chain");
}

AssemblyState random_assembly(const SyntheticOptions& opt)
{
  if (opt.chains < 2)
    throw InputError("random_assembly: need at least 2 chains");
  Rng rng(opt.seed);
  AssemblyState s;
  for (std::size_t i = 0; i < opt.chains; ++i) {
    Rng sub = rng.split(i);
    ChainStructure c = random_chain(opt.residues_per_chain, sub, std::string(1, static_cast<char>('A' + i % 26)));
    if (opt.random_restypes)
      for (auto& t : c.restypes)
        t = static_cast<int>(sub.next_u64() % 20);
    s.chains.push_back(std::move(c));
  }
  // place each mobile chain just outside the first one along a random direction
  double r0 = 0.0;
  for (const auto& p : s.chains[0].coords)
    r0 = std::max(r0, p.norm());
  Rng place = rng.split(opt.chains);
  for (std::size_t i = 1; i < opt.chains; ++i) {
    double ri = 0.0;
    for (const auto& p : s.chains[i].coords)
      ri = std::max(ri, p.norm());
    const Vec3 shift = place.unit_vector() * (0.8 * (r0 + ri) + 4.0);
    for (auto& p : s.chains[i].coords)
      p += shift;
  }
  s.fixed_index = 0;
  s.validate();
  s.normalize();
  return s;
}

AssemblyState docked_assembly(const SyntheticOptions& opt, const Potential& f, int starts)
{
  if (starts < 1)
    throw InputError("docked_assembly: starts must be >= 1");
  const AssemblyState base = random_assembly(opt);
  GameConfig cfg;
  cfg.steps = 1000;
  cfg.eta0 = 0.5;
  cfg.eta_exponent = 0.0;
  cfg.convergence_tol = 1e-5;
  cfg.penalty.lambda = 0.0; // a stationary point of f itself
  cfg.seed = opt.seed;
  InitNoise noise;
  noise.tr_scale = 1.0;
  noise.rot_mode = RotMode::uniform;
  const auto eq = enumerate_equilibria(base, f, cfg, static_cast<std::size_t>(starts), noise);
  if (eq.games.empty())
    throw NumericalError("docked_assembly: every relaxation failed");
  AssemblyState out = eq.games.front().final_state;
  out.normalize();
  return out;
}

} // namespace dockeq
