#pragma once

#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "dockeq/assembly.hpp"

namespace dockeq {

enum class GradBackend { analytic, finite_diff };

inline constexpr double kDefaultFdStep = 1e-4;

/// Energy of an assembly. Lower is better. Implementations must be invariant
/// under a common rigid motion of all chains.
class Potential
{
public:
  virtual ~Potential() = default;

  virtual double evaluate(const AssemblyState& s) const = 0;

  /// dE/dx for every residue of chain `chain`, written to `out` (resized).
  /// Returns false when the potential has no analytic coordinate gradient.
  virtual bool coordinate_gradient(const AssemblyState& s, std::size_t chain, std::vector<Vec3>& out) const;

  /// Riemannian gradient for chain `chain`: derivatives along the three
  /// rotation generators about the chain centroid and the three translations.
  /// Falls back to finite differences without an analytic gradient.
  virtual TangentVector riemannian_grad(const AssemblyState& s, std::size_t chain) const;
};

/// Torque/force aggregation of per-residue gradients:
/// omega = sum (x - xbar) x dE/dx, vel = sum dE/dx.
TangentVector aggregate_gradient(std::span<const Vec3> coords, std::span<const Vec3> grad);

/// Central differences along the six tangent directions of chain `chain`.
TangentVector fd_riemannian_grad(const Potential& f, const AssemblyState& s, std::size_t chain,
                                 double h_rot = kDefaultFdStep, double h_tr = kDefaultFdStep);

TangentVector riemannian_grad(const Potential& f, const AssemblyState& s, std::size_t chain,
                              GradBackend backend, double fd_step = kDefaultFdStep);

/// Moves chain `chain` along tangent `v` scaled by `step` (exp-map rotation
/// about its centroid, then translation).
AssemblyState move_chain(const AssemblyState& s, std::size_t chain, const TangentVector& v, double step);

// ---------------------------------------------------------------------------

/// Pairwise C-alpha contact energy standing in for a docking score:
///   phi(d) = -eps exp(-(d - rho)^2 / rho^2) + k (rho0 - d)^2 [d < rho0].
/// C1 everywhere, minimum -eps at d = rho, phi -> 0 as d -> inf.
struct ContactParams
{
  double well_depth = 1.0;          ///< eps
  double contact_radius = 6.0;      ///< rho, Angstrom
  double repulsion_radius = 3.0;    ///< rho0, Angstrom
  double repulsion_strength = 10.0; ///< k, energy / Angstrom^2

  void validate() const;
};

class ContactPotential final : public Potential
{
public:
  explicit ContactPotential(ContactParams p = {});

  const ContactParams& params() const { return p_; }
  double pair_energy(double d) const;
  double pair_derivative(double d) const;

  double evaluate(const AssemblyState& s) const override;
  bool coordinate_gradient(const AssemblyState& s, std::size_t chain, std::vector<Vec3>& out) const override;

private:
  ContactParams p_;
};

inline double contact_energy(const ContactPotential& p, const AssemblyState& s) { return p.evaluate(s); }

// ---------------------------------------------------------------------------

/// lambda * sum_{i<j} ReLU(min residue distance(i, j) - d_ths).
struct GamePenaltyParams
{
  double lambda = 0.5;
  double d_ths = 5.0;

  void validate() const;
};

/// sum over unordered chain pairs of ReLU(min distance - d_ths) (without lambda).
double distance_penalty(const AssemblyState& s, const GamePenaltyParams& p);

/// Riemannian (sub)gradient of the unscaled penalty with respect to chain
/// `chain`; only the closest residue pair of each active chain pair contributes.
TangentVector penalty_grad(const AssemblyState& s, std::size_t chain, const GamePenaltyParams& p);

// ---------------------------------------------------------------------------

/// Linear model over soft-binned histograms of inter-chain residue distances.
/// Each bin uses a cubic B-spline kernel of width equal to the bin spacing, so
/// the energy is C2 in the coordinates. With restype channels every residue
/// type pair (unordered, 231 classes) gets its own histogram.
class SurrogatePotential final : public Potential
{
public:
  static constexpr int kFormatVersion = 1;
  static constexpr std::size_t kNumTypePairs = kNumResidueTypes * (kNumResidueTypes + 1) / 2;

  SurrogatePotential() : SurrogatePotential(32, 40.0, false) {}
  SurrogatePotential(std::size_t bins, double max_distance, bool restype_channels);

  std::size_t bins() const { return edges_.size() - 1; }
  std::size_t channels() const { return restype_channels_ ? kNumTypePairs : 1; }
  std::size_t num_features() const { return bins() * channels(); }
  bool restype_channels() const { return restype_channels_; }
  const std::vector<double>& bin_edges() const { return edges_; }
  const std::vector<double>& weights() const { return weights_; }
  void set_weights(std::vector<double> w);

  /// Soft histogram of all inter-chain residue-pair distances.
  std::vector<double> features(const AssemblyState& s) const;

  /// Nonzero basis values at distance d: writes up to 4 values for
  /// consecutive bins starting at `first`; returns the count.
  int basis(double d, std::size_t& first, double* vals) const;
  int basis_derivative(double d, std::size_t& first, double* vals) const;

  double evaluate(const AssemblyState& s) const override;
  bool coordinate_gradient(const AssemblyState& s, std::size_t chain, std::vector<Vec3>& out) const override;

  nlohmann::json to_json() const;
  static SurrogatePotential from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static SurrogatePotential load(const std::filesystem::path& path);

private:
  std::size_t type_pair(int a, int b) const;

  std::vector<double> edges_;
  double width_ = 1.0;
  bool restype_channels_ = false;
  std::vector<double> weights_;
};

/// Index of the unordered residue-type pair (a, b).
std::size_t residue_type_pair(int a, int b);

// ---------------------------------------------------------------------------

/// An ordered comparison: `high` has the larger ground-truth energy.
struct StatePair
{
  AssemblyState high;
  AssemblyState low;
};

/// log(1 + e^x) without overflow.
double softplus(double x);

/// mean over pairs of -log sigmoid(f(high) - f(low)).
double ranking_loss(const Potential& f, std::span<const StatePair> pairs);

/// Loss and weight gradient of a linear model given feature differences
/// phi(high) - phi(low), one row per pair.
double ranking_loss_linear(std::span<const double> weights, const std::vector<std::vector<double>>& diffs,
                           std::vector<double>* grad = nullptr);

struct CorrelationReport
{
  double pearson_r = 0.0;
  double sign_agreement = 0.0;
  std::size_t pairs = 0;
};

/// Compares energy differences f(high) - f(low) of a learned and a reference
/// potential. Needs at least 10 pairs.
CorrelationReport surrogate_vs_truth_report(const Potential& learned, const Potential& truth,
                                            std::span<const StatePair> pairs);

} // namespace dockeq
