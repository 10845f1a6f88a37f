#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dockeq/geom.hpp"

namespace dockeq {

/// Number of residue classes: 20 standard amino acids plus "unknown".
inline constexpr int kNumResidueTypes = 21;
inline constexpr int kUnknownResidue = 20;

/// One rigid chain: a C-alpha point cloud plus per-residue type indices.
/// The chain index feature is the chain's position in the assembly.
struct ChainStructure
{
  std::string id;
  PointCloud coords;
  std::vector<int> restypes;

  std::size_t size() const { return coords.size(); }
  Vec3 centroid() const { return dockeq::centroid(coords); }
  /// Throws InputError if empty, non-finite or restypes mismatched.
  void validate() const;
};

/// N >= 2 chains, one of which (fixed_index) is held stationary.
struct AssemblyState
{
  std::vector<ChainStructure> chains;
  std::size_t fixed_index = 0;

  std::size_t num_chains() const { return chains.size(); }
  std::size_t num_residues() const;
  /// All coordinates, chain after chain.
  PointCloud concatenated() const;
  bool same_layout(const AssemblyState& other) const;
  void validate() const;

  /// Shift every chain so that the fixed chain centroid is the origin. No-op
  /// when it is already within 1e-9 of it.
  void normalize();
};

/// Largest chain, ties broken by lowest index.
std::size_t default_fixed_index(const std::vector<ChainStructure>& chains);

/// Per-chain actions for all N chains; the fixed chain entry is the identity.
struct JointAction
{
  std::vector<RigidAction> actions;

  static JointAction identity(std::size_t n) { return {std::vector<RigidAction>(n)}; }
  std::size_t size() const { return actions.size(); }
};

/// Per-chain tangent vectors for all N chains; the fixed chain entry is zero.
struct JointTangent
{
  std::vector<TangentVector> v;

  static JointTangent zero(std::size_t n) { return {std::vector<TangentVector>(n)}; }
  std::size_t size() const { return v.size(); }
  double max_norm() const;
  bool finite() const;
};

/// Each chain moved by its action about its own centroid.
AssemblyState apply_joint(const JointAction& a, const AssemblyState& s);

/// Same SE(3) motion applied to every chain.
AssemblyState apply_motion(const RigidMotion& m, const AssemblyState& s);

/// Relative action taking chain i of `from` onto chain i of `to` (rotation by
/// Kabsch about the centroids, translation = centroid shift). Chains with
/// fewer than 3 residues get the identity rotation.
RigidAction relative_action(const ChainStructure& from, const ChainStructure& to);

/// C-RMSD after Kabsch superposition of the concatenated clouds.
double complex_rmsd(const AssemblyState& pred, const AssemblyState& truth);

/// TM-score over the concatenated clouds (>= 16 residues).
double tm_score(const AssemblyState& pred, const AssemblyState& truth);

} // namespace dockeq
