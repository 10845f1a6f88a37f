#pragma once

#include <cmath>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace dockeq {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using PointCloud = std::vector<Vec3>;

/// Element of SO(3), stored as a 3x3 matrix.
struct Rotation
{
  Mat3 m = Mat3::Identity();

  static Rotation identity() { return {}; }
  static Rotation from_quaternion(double w, double x, double y, double z);

  /// Unit quaternion (w, x, y, z) with w >= 0.
  Eigen::Vector4d quaternion() const;
  Rotation inverse() const { return {m.transpose()}; }
  Rotation operator*(const Rotation& o) const { return {m * o.m}; }
  Vec3 operator*(const Vec3& v) const { return m * v; }
};

struct Translation
{
  Vec3 v = Vec3::Zero();
};

/// Rotation about the cloud centroid followed by a translation:
/// x -> R (x - c) + c + r.
struct RigidAction
{
  Rotation rot;
  Translation tr;

  static RigidAction identity() { return {}; }
  bool is_identity() const;
  /// Inverse under the centroid-pivoted action: (R^T, -r).
  RigidAction inverse() const;
};

/// Tangent element of SO(3) x T(3): angular rate (axis-angle, rad) and
/// linear velocity (Angstrom).
struct TangentVector
{
  Vec3 omega = Vec3::Zero();
  Vec3 vel = Vec3::Zero();

  double norm() const { return std::sqrt(omega.squaredNorm() + vel.squaredNorm()); }
  bool finite() const { return omega.allFinite() && vel.allFinite(); }
};

Mat3 hat(const Vec3& v);

/// Rodrigues' formula; the zero vector maps to the identity.
Rotation axis_angle_to_matrix(const Vec3& omega);

/// Rotation vector with norm in [0, pi]. At angle pi the axis is chosen with
/// its first nonzero component positive.
Vec3 matrix_to_axis_angle(const Rotation& r);

/// Angle of a rotation in [0, pi].
double rotation_angle(const Rotation& r);

Vec3 centroid(std::span<const Vec3> x);

/// x -> R (x - pivot) + pivot + r. `pivot` must be the centroid of `x`.
PointCloud apply_action(const RigidAction& a, std::span<const Vec3> x, const Vec3& pivot);
PointCloud apply_action(const RigidAction& a, std::span<const Vec3> x);

/// Single action equivalent to applying `a_old` and then `a_new`, each about
/// the current centroid. The result does not depend on the pivot because the
/// rotation never moves the centroid.
RigidAction compose(const RigidAction& a_new, const RigidAction& a_old);

/// Plain SE(3) motion x -> R x + t, used for global rigid moves and Kabsch.
struct RigidMotion
{
  Mat3 rot = Mat3::Identity();
  Vec3 trans = Vec3::Zero();

  Vec3 operator()(const Vec3& x) const { return rot * x + trans; }
  PointCloud operator()(std::span<const Vec3> x) const;
};

struct KabschResult
{
  Rotation rot;
  Vec3 trans = Vec3::Zero(); ///< q ~ rot * p + trans
  double rmsd = 0.0;
  bool degenerate = false;   ///< covariance rank < 2; rotation not unique (identity if rank 0)

  RigidMotion motion() const { return {rot.m, trans}; }
};

/// Superposition of P onto Q minimising the RMSD. |P| = |Q| >= 3.
KabschResult kabsch_align(std::span<const Vec3> p, std::span<const Vec3> q);

/// Weighted-free Kabsch restricted to an index subset; the returned rmsd is
/// over the subset only.
KabschResult kabsch_align_subset(std::span<const Vec3> p, std::span<const Vec3> q,
                                 std::span<const std::size_t> subset);

double rmsd(std::span<const Vec3> p, std::span<const Vec3> q);

/// d0(L) = 1.24 (L - 15)^(1/3) - 1.8.
double tm_d0(std::size_t length);

/// (1/L) sum 1 / (1 + (d_i/d0)^2).
double tm_from_distances(std::span<const double> d, double d0);

struct TmResult
{
  double score = 0.0;
  RigidMotion motion; ///< applied to the prediction
  int iterations = 0;
};

/// TM-score of `pred` against `truth` (same length L >= 16). Superposition by
/// Kabsch on all residues followed by up to `max_iter` rounds of Kabsch on the
/// residues closer than d0; the best score seen is reported. This approximates
/// the full TM-align search.
TmResult tm_score_points(std::span<const Vec3> pred, std::span<const Vec3> truth, int max_iter = 20);

} // namespace dockeq
