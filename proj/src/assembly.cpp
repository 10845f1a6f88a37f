#include "dockeq/assembly.hpp"

#include "dockeq/errors.hpp"

namespace dockeq {

void ChainStructure::validate() const
{
  if (coords.empty())
    throw InputError("chain '" + id + "' has no residues");
  if (restypes.size() != coords.size())
    throw InputError("chain '" + id + "': restypes length " + std::to_string(restypes.size()) +
                     " does not match coords length " + std::to_string(coords.size()));
  for (std::size_t i = 0; i < coords.size(); ++i) {
    if (!coords[i].allFinite())
      throw InputError("chain '" + id + "': non-finite coordinate at residue " + std::to_string(i));
    if (restypes[i] < 0 || restypes[i] >= kNumResidueTypes)
      throw InputError("chain '" + id + "': residue type out of range at residue " + std::to_string(i));
  }
}

std::size_t AssemblyState::num_residues() const
{
  std::size_t n = 0;
  for (const auto& c : chains)
    n += c.size();
  return n;
}

PointCloud AssemblyState::concatenated() const
{
  PointCloud out;
  out.reserve(num_residues());
  for (const auto& c : chains)
    out.insert(out.end(), c.coords.begin(), c.coords.end());
  return out;
}

bool AssemblyState::same_layout(const AssemblyState& other) const
{
  if (chains.size() != other.chains.size() || fixed_index != other.fixed_index)
    return false;
  for (std::size_t i = 0; i < chains.size(); ++i)
    if (chains[i].size() != other.chains[i].size())
      return false;
  return true;
}

void AssemblyState::validate() const
{
  if (chains.size() < 2)
    throw InputError("assembly needs at least 2 chains, got " + std::to_string(chains.size()));
  if (fixed_index >= chains.size())
    throw InputError("fixed chain index " + std::to_string(fixed_index) + " out of range");
  for (const auto& c : chains)
    c.validate();
}

void AssemblyState::normalize()
{
  const Vec3 c = chains.at(fixed_index).centroid();
  // already canonical: leave the coordinates alone so save/load is exact
  if (c.norm() <= 1e-9)
    return;
  for (auto& ch : chains)
    for (auto& p : ch.coords)
      p -= c;
}

std::size_t default_fixed_index(const std::vector<ChainStructure>& chains)
{
  std::size_t best = 0;
  for (std::size_t i = 1; i < chains.size(); ++i)
    if (chains[i].size() > chains[best].size())
      best = i;
  return best;
}

double JointTangent::max_norm() const
{
  double m = 0.0;
  for (const auto& t : v)
    m = std::max(m, t.norm());
  return m;
}

bool JointTangent::finite() const
{
  for (const auto& t : v)
    if (!t.finite())
      return false;
  return true;
}

AssemblyState apply_joint(const JointAction& a, const AssemblyState& s)
{
  if (a.size() != s.num_chains())
    throw InputError("joint action has " + std::to_string(a.size()) + " entries for " +
                     std::to_string(s.num_chains()) + " chains");
  AssemblyState out = s;
  for (std::size_t i = 0; i < s.num_chains(); ++i) {
    if (a.actions[i].is_identity())
      continue;
    out.chains[i].coords = apply_action(a.actions[i], s.chains[i].coords);
  }
  return out;
}

AssemblyState apply_motion(const RigidMotion& m, const AssemblyState& s)
{
  AssemblyState out = s;
  for (auto& c : out.chains)
    c.coords = m(c.coords);
  return out;
}

RigidAction relative_action(const ChainStructure& from, const ChainStructure& to)
{
  if (from.size() != to.size())
    throw InputError("relative_action: chain sizes differ");
  RigidAction a;
  a.tr.v = to.centroid() - from.centroid();
  if (from.size() >= 3) {
    const auto k = kabsch_align(from.coords, to.coords);
    if (!k.degenerate)
      a.rot = k.rot;
  }
  return a;
}

namespace {

void check_pair(const AssemblyState& pred, const AssemblyState& truth)
{
  if (pred.num_chains() != truth.num_chains())
    throw InputError("chain count mismatch: " + std::to_string(pred.num_chains()) + " vs " +
                     std::to_string(truth.num_chains()));
  for (std::size_t i = 0; i < pred.num_chains(); ++i)
    if (pred.chains[i].size() != truth.chains[i].size())
      throw InputError("chain " + std::to_string(i) + " ('" + pred.chains[i].id + "') has " +
                       std::to_string(pred.chains[i].size()) + " residues, truth has " +
                       std::to_string(truth.chains[i].size()));
}

} // namespace

double complex_rmsd(const AssemblyState& pred, const AssemblyState& truth)
{
  check_pair(pred, truth);
  const auto p = pred.concatenated();
  const auto q = truth.concatenated();
  if (p.size() >= 3)
    return kabsch_align(p, q).rmsd;
  // two single-residue chains: the pair is collinear, still well defined
  std::vector<std::size_t> idx(p.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    idx[i] = i;
  return kabsch_align_subset(p, q, idx).rmsd;
}

double tm_score(const AssemblyState& pred, const AssemblyState& truth)
{
  check_pair(pred, truth);
  return tm_score_points(pred.concatenated(), truth.concatenated()).score;
}

} // namespace dockeq
