#pragma once

#include "dockeq/assembly.hpp"
#include "dockeq/igso3.hpp"
#include "dockeq/rng.hpp"

namespace dockeq {

enum class Component { rot, tr };

/// Exponential variance-exploding schedule sigma(t) = smin^(1-t) smax^t for
/// the rotational and translational components.
struct NoiseSchedule
{
  double sigma_min_tr = 0.01;
  double sigma_max_tr = 25.0;
  double sigma_min_rot = 0.01;
  double sigma_max_rot = 1.65;

  void validate() const;

  double sigma_at(Component c, double t) const;

  /// Squared diffusion coefficient of the forward SDE. Translation:
  /// d[sigma^2]/dt. Rotation: d[2 sigma^2]/dt, because the IGSO(3) kernel
  /// with parameter sigma is Brownian motion on SO(3) run for time 2 sigma^2.
  double g2(Component c, double t) const;

  /// Sigma grid covering the rotational range, for building IGSO(3) tables.
  std::vector<double> rot_sigma_grid(int n = 128) const;
};

struct Perturbation
{
  AssemblyState state;
  JointAction applied;
};

/// Forward kernel: every mobile chain independently gets an IGSO(3)(sigma_rot(t))
/// rotation about its own centroid and a N(0, sigma_tr(t)^2 I) translation.
Perturbation perturb(const AssemblyState& state, double t, const igso3::Table& table,
                     const NoiseSchedule& sched, Rng& rng);

/// Gradient of log p(x_t | x_0) at the perturbed state: per chain
/// (dlogf(w) w_hat, -r / sigma_tr^2). Fixed chain entry is zero.
JointTangent kernel_score(const JointAction& applied, std::size_t fixed_index, double t,
                          const igso3::Table& table, const NoiseSchedule& sched);

/// log p(x_t | x_0) up to a t-dependent constant, as a function of the
/// applied perturbation.
double log_kernel_density(const JointAction& applied, std::size_t fixed_index, double t,
                          const NoiseSchedule& sched);

} // namespace dockeq
