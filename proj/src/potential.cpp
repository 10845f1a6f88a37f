#include "dockeq/potential.hpp"

#include <cmath>

#include "dockeq/errors.hpp"
#include "dockeq/kernels.hpp"

namespace dockeq {

bool Potential::coordinate_gradient(const AssemblyState&, std::size_t, std::vector<Vec3>&) const
{
  return false;
}

TangentVector Potential::riemannian_grad(const AssemblyState& s, std::size_t chain) const
{
  std::vector<Vec3> g;
  if (coordinate_gradient(s, chain, g))
    return aggregate_gradient(s.chains[chain].coords, g);
  return fd_riemannian_grad(*this, s, chain);
}

TangentVector aggregate_gradient(std::span<const Vec3> coords, std::span<const Vec3> grad)
{
  const Vec3 c = centroid(coords);
  TangentVector t;
  for (std::size_t k = 0; k < coords.size(); ++k) {
    t.omega += (coords[k] - c).cross(grad[k]);
    t.vel += grad[k];
  }
  return t;
}

AssemblyState move_chain(const AssemblyState& s, std::size_t chain, const TangentVector& v, double step)
{
  AssemblyState out = s;
  const RigidAction a{axis_angle_to_matrix(step * v.omega), {step * v.vel}};
  out.chains[chain].coords = apply_action(a, s.chains[chain].coords);
  return out;
}

TangentVector fd_riemannian_grad(const Potential& f, const AssemblyState& s, std::size_t chain,
                                 double h_rot, double h_tr)
{
  TangentVector t;
  for (int k = 0; k < 3; ++k) {
    TangentVector e;
    e.omega[k] = 1.0;
    t.omega[k] = (f.evaluate(move_chain(s, chain, e, h_rot)) - f.evaluate(move_chain(s, chain, e, -h_rot))) /
                 (2.0 * h_rot);
    TangentVector u;
    u.vel[k] = 1.0;
    t.vel[k] = (f.evaluate(move_chain(s, chain, u, h_tr)) - f.evaluate(move_chain(s, chain, u, -h_tr))) /
               (2.0 * h_tr);
  }
  return t;
}

TangentVector riemannian_grad(const Potential& f, const AssemblyState& s, std::size_t chain,
                              GradBackend backend, double fd_step)
{
  if (chain >= s.num_chains())
    throw InputError("riemannian_grad: chain index out of range");
  if (backend == GradBackend::finite_diff)
    return fd_riemannian_grad(f, s, chain, fd_step, fd_step);
  return f.riemannian_grad(s, chain);
}

// ---------------------------------------------------------------------------

void ContactParams::validate() const
{
  if (!(well_depth > 0.0))
    throw InputError("contact potential: well_depth must be positive");
  if (!(repulsion_radius > 0.0 && repulsion_radius < contact_radius))
    throw InputError("contact potential: need 0 < repulsion_radius < contact_radius");
  if (!(repulsion_strength >= 0.0))
    throw InputError("contact potential: repulsion_strength must be >= 0");
}

ContactPotential::ContactPotential(ContactParams p) : p_(p)
{
  p_.validate();
}

double ContactPotential::pair_energy(double d) const
{
  const double x = (d - p_.contact_radius) / p_.contact_radius;
  double e = -p_.well_depth * std::exp(-x * x);
  if (d < p_.repulsion_radius) {
    const double r = p_.repulsion_radius - d;
    e += p_.repulsion_strength * r * r;
  }
  return e;
}

double ContactPotential::pair_derivative(double d) const
{
  const double rho = p_.contact_radius;
  const double x = (d - rho) / rho;
  double g = 2.0 * p_.well_depth * (d - rho) / (rho * rho) * std::exp(-x * x);
  if (d < p_.repulsion_radius)
    g -= 2.0 * p_.repulsion_strength * (p_.repulsion_radius - d);
  return g;
}

double ContactPotential::evaluate(const AssemblyState& s) const
{
  auto term = [this](double d, std::size_t, std::size_t) {
    return kernels::PairTerm{pair_energy(d), 0.0};
  };
  double e = 0.0;
  for (std::size_t i = 0; i < s.num_chains(); ++i)
    for (std::size_t j = i + 1; j < s.num_chains(); ++j)
      e += kernels::omp::pair_sum(s.chains[i].coords, s.chains[j].coords, term);
  return e;
}

bool ContactPotential::coordinate_gradient(const AssemblyState& s, std::size_t chain, std::vector<Vec3>& out) const
{
  auto term = [this](double d, std::size_t, std::size_t) {
    return kernels::PairTerm{0.0, pair_derivative(d)};
  };
  const auto& ci = s.chains[chain].coords;
  out.assign(ci.size(), Vec3::Zero());
  for (std::size_t j = 0; j < s.num_chains(); ++j)
    if (j != chain)
      kernels::omp::pair_sum(ci, s.chains[j].coords, term, out.data());
  return true;
}

// ---------------------------------------------------------------------------

void GamePenaltyParams::validate() const
{
  if (!(lambda >= 0.0))
    throw InputError("penalty: lambda must be >= 0");
  if (!(d_ths > 0.0))
    throw InputError("penalty: d_ths must be positive");
}

double distance_penalty(const AssemblyState& s, const GamePenaltyParams& p)
{
  double total = 0.0;
  for (std::size_t i = 0; i < s.num_chains(); ++i)
    for (std::size_t j = i + 1; j < s.num_chains(); ++j) {
      const auto m = kernels::omp::min_distance(s.chains[i].coords, s.chains[j].coords);
      total += std::max(0.0, m.dist - p.d_ths);
    }
  return total;
}

TangentVector penalty_grad(const AssemblyState& s, std::size_t chain, const GamePenaltyParams& p)
{
  const auto& ci = s.chains[chain].coords;
  std::vector<Vec3> g(ci.size(), Vec3::Zero());
  for (std::size_t j = 0; j < s.num_chains(); ++j) {
    if (j == chain)
      continue;
    const auto m = kernels::omp::min_distance(ci, s.chains[j].coords);
    if (m.dist > p.d_ths)
      g[m.ia] += (ci[m.ia] - s.chains[j].coords[m.ib]) / m.dist;
  }
  return aggregate_gradient(ci, g);
}

} // namespace dockeq
