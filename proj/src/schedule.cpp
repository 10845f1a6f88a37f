#include "dockeq/schedule.hpp"

#include <cmath>

#include "dockeq/errors.hpp"

namespace dockeq {

void NoiseSchedule::validate() const
{
  if (!(sigma_min_tr > 0.0 && sigma_min_tr < sigma_max_tr))
    throw InputError("schedule: need 0 < sigma_min_tr < sigma_max_tr");
  if (!(sigma_min_rot > 0.0 && sigma_min_rot < sigma_max_rot))
    throw InputError("schedule: need 0 < sigma_min_rot < sigma_max_rot");
}

double NoiseSchedule::sigma_at(Component c, double t) const
{
  const double lo = c == Component::rot ? sigma_min_rot : sigma_min_tr;
  const double hi = c == Component::rot ? sigma_max_rot : sigma_max_tr;
  return std::pow(lo, 1.0 - t) * std::pow(hi, t);
}

double NoiseSchedule::g2(Component c, double t) const
{
  const double lo = c == Component::rot ? sigma_min_rot : sigma_min_tr;
  const double hi = c == Component::rot ? sigma_max_rot : sigma_max_tr;
  const double s = sigma_at(c, t);
  const double d = 2.0 * s * s * std::log(hi / lo);
  return c == Component::rot ? 2.0 * d : d;
}

std::vector<double> NoiseSchedule::rot_sigma_grid(int n) const
{
  return igso3::Table::log_grid(sigma_min_rot, sigma_max_rot, n);
}

Perturbation perturb(const AssemblyState& state, double t, const igso3::Table& table,
                     const NoiseSchedule& sched, Rng& rng)
{
  const double s_rot = sched.sigma_at(Component::rot, t);
  const double s_tr = sched.sigma_at(Component::tr, t);
  Perturbation out{state, JointAction::identity(state.num_chains())};
  for (std::size_t i = 0; i < state.num_chains(); ++i) {
    if (i == state.fixed_index)
      continue;
    RigidAction& a = out.applied.actions[i];
    a.rot = table.sample_rotation(s_rot, rng);
    a.tr.v = s_tr * rng.normal3();
    out.state.chains[i].coords = apply_action(a, state.chains[i].coords);
  }
  return out;
}

JointTangent kernel_score(const JointAction& applied, std::size_t fixed_index, double t,
                          const igso3::Table& table, const NoiseSchedule& sched)
{
  const double s_rot = sched.sigma_at(Component::rot, t);
  const double s_tr = sched.sigma_at(Component::tr, t);
  JointTangent out = JointTangent::zero(applied.size());
  for (std::size_t i = 0; i < applied.size(); ++i) {
    if (i == fixed_index)
      continue;
    out.v[i].omega = table.rotation_score(s_rot, applied.actions[i].rot);
    out.v[i].vel = -applied.actions[i].tr.v / (s_tr * s_tr);
  }
  return out;
}

double log_kernel_density(const JointAction& applied, std::size_t fixed_index, double t,
                          const NoiseSchedule& sched)
{
  const double s_rot = sched.sigma_at(Component::rot, t);
  const double s_tr = sched.sigma_at(Component::tr, t);
  double lp = 0.0;
  for (std::size_t i = 0; i < applied.size(); ++i) {
    if (i == fixed_index)
      continue;
    lp += igso3::evaluate(rotation_angle(applied.actions[i].rot), s_rot).log_f;
    lp -= applied.actions[i].tr.v.squaredNorm() / (2.0 * s_tr * s_tr);
  }
  return lp;
}

} // namespace dockeq
