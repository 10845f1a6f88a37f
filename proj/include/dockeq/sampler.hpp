#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dockeq/assembly.hpp"
#include "dockeq/game.hpp"
#include "dockeq/igso3.hpp"
#include "dockeq/potential.hpp"
#include "dockeq/schedule.hpp"

namespace dockeq {

/// Tangent-space score of a time-dependent distribution over assemblies.
/// Implementations return a finite JointTangent with a zero fixed-chain entry.
class ScoreField
{
public:
  virtual ~ScoreField() = default;
  virtual JointTangent score(const AssemblyState& s, double t) const = 0;
};

/// s = 0 everywhere.
class ZeroScore final : public ScoreField
{
public:
  JointTangent score(const AssemblyState& s, double) const override { return JointTangent::zero(s.num_chains()); }
};

/// Exact score of the perturbed distribution when the data distribution is a
/// weighted sum of point masses: p_t is then a mixture of transition kernels.
class MixtureOracle final : public ScoreField
{
public:
  /// Weights are normalised; all modes must share the chain layout and fixed chain.
  MixtureOracle(std::vector<AssemblyState> modes, std::vector<double> weights, const igso3::Table& table,
                NoiseSchedule sched);

  const std::vector<AssemblyState>& modes() const { return modes_; }
  const std::vector<double>& weights() const { return weights_; }

  /// Posterior mode probabilities given the state at time t.
  std::vector<double> responsibilities(const AssemblyState& s, double t) const;

  /// log p_t(s) up to a constant independent of s.
  double log_density(const AssemblyState& s, double t) const;

  JointTangent score(const AssemblyState& s, double t) const override;

private:
  /// Relative action of every chain from mode k to s, plus the kernel log density.
  double mode_log_term(std::size_t k, const AssemblyState& s, double t, JointAction* rel) const;

  std::vector<AssemblyState> modes_;
  std::vector<double> weights_;
  const igso3::Table* table_;
  NoiseSchedule sched_;
};

/// Score of the Gibbs density exp(-f / temperature), independent of t.
class PotentialScoreField final : public ScoreField
{
public:
  explicit PotentialScoreField(const Potential& f, double temperature = 1.0,
                               GradBackend backend = GradBackend::analytic);
  JointTangent score(const AssemblyState& s, double t) const override;

private:
  const Potential* f_;
  double temperature_;
  GradBackend backend_;
};

/// Score-like callback that also sees the applied perturbation and the index
/// of the clean data point, for oracles that know the answer.
using PerturbationScore = std::function<JointTangent(const Perturbation&, std::size_t data_index, double t)>;

struct DsmWeights
{
  double rot = 1.0; ///< 1 / E[|rotation score|^2]
  double tr = 1.0;  ///< 1 / E[|translation score|^2] = sigma_tr^2 / 3
};

DsmWeights dsm_weights(double t, const igso3::Table& table, const NoiseSchedule& sched);

/// Monte-Carlo denoising score matching loss: mean over data points, times and
/// `repeats` perturbations of sum over mobile chains of
///   w_rot |s_rot - k_rot|^2 + w_tr |s_tr - k_tr|^2,
/// where k is the kernel score of the perturbation. With s = 0 each chain
/// contributes about 2 (one per component).
double dsm_loss(const ScoreField& s, std::span<const AssemblyState> data, std::span<const double> t_samples,
                const igso3::Table& table, const NoiseSchedule& sched, Rng& rng, int repeats = 1);
double dsm_loss(const PerturbationScore& s, std::span<const AssemblyState> data, std::span<const double> t_samples,
                const igso3::Table& table, const NoiseSchedule& sched, Rng& rng, int repeats = 1);

struct SamplerConfig
{
  int n_steps = 50;
  int n_samples = 40;
  std::uint64_t seed = 0;
  bool noise_on_final_step = false;
  bool stochastic = true; ///< false drops the noise term on every step
  double cluster_radius = 2.0;

  void validate() const;
};

/// Snapshots of one reverse run; actions are cumulative relative to the first state.
struct DiffusionTrajectory
{
  std::vector<AssemblyState> states;
  std::vector<JointAction> actions;

  const AssemblyState& final_state() const { return states.back(); }
};

/// Mobile chains of `base` get a Haar-uniform rotation about their centroid and
/// a N(0, sigma_max_tr^2 I) translation.
AssemblyState sample_prior(const AssemblyState& base, const NoiseSchedule& sched, Rng& rng);

/// Euler-Maruyama geodesic random walk on the reverse SDE over the uniform
/// time grid t = 1, 1 - 1/n, ..., 1/n. Starts from `init` when given,
/// otherwise from sample_prior(base).
DiffusionTrajectory reverse_diffuse(const ScoreField& s, const AssemblyState& base,
                                    const std::optional<AssemblyState>& init, const SamplerConfig& cfg,
                                    const NoiseSchedule& sched, Rng& rng);

struct SampleFailure
{
  std::size_t sample = 0;
  std::string message;
};

struct SampleSet
{
  std::vector<DiffusionTrajectory> runs; ///< successful runs, in sample order
  std::vector<std::size_t> sample_index;
  std::vector<SampleFailure> failures;
  std::vector<Cluster> clusters;         ///< members index into runs
};

/// n_samples independent reverse runs from the prior (sample j uses
/// Rng(cfg.seed).split(j)), clustered by C-RMSD. When `energy` is given
/// clusters are represented by their lowest-energy member.
SampleSet sample_equilibria(const ScoreField& s, const AssemblyState& base, const SamplerConfig& cfg,
                            const NoiseSchedule& sched, const Potential* energy = nullptr);

/// Same line format as game trajectories; energies are written when `f` is given.
void write_diffusion_jsonl(const DiffusionTrajectory& traj, std::size_t fixed_index, std::ostream& os,
                           const Potential* f = nullptr);

} // namespace dockeq
