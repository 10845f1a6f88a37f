#include "dockeq/geom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "dockeq/errors.hpp"

namespace dockeq {

Rotation Rotation::from_quaternion(double w, double x, double y, double z)
{
  Eigen::Quaterniond q(w, x, y, z);
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n))
    throw InputError("quaternion has zero or non-finite norm");
  q.coeffs() /= n;
  return {q.toRotationMatrix()};
}

Eigen::Vector4d Rotation::quaternion() const
{
  Eigen::Quaterniond q(m);
  q.normalize();
  if (q.w() < 0.0)
    q.coeffs() = -q.coeffs();
  return {q.w(), q.x(), q.y(), q.z()};
}

bool RigidAction::is_identity() const
{
  return rot.m == Mat3::Identity() && tr.v == Vec3::Zero();
}

RigidAction RigidAction::inverse() const
{
  return {rot.inverse(), {-tr.v}};
}

Mat3 hat(const Vec3& v)
{
  Mat3 k;
  k << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return k;
}

Rotation axis_angle_to_matrix(const Vec3& omega)
{
  const double theta2 = omega.squaredNorm();
  const double theta = std::sqrt(theta2);
  double a, b; // sin(t)/t, (1 - cos(t))/t^2
  if (theta < 1e-4) {
    a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0;
    b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  const Mat3 k = hat(omega);
  return {Mat3::Identity() + a * k + b * k * k};
}

Vec3 matrix_to_axis_angle(const Rotation& r)
{
  const Eigen::Vector4d q = r.quaternion();
  const Vec3 v(q[1], q[2], q[3]);
  const double s = v.norm();
  if (s == 0.0)
    return Vec3::Zero();
  const double angle = 2.0 * std::atan2(s, q[0]);
  Vec3 axis = v / s;
  if (q[0] < 1e-12) {
    // angle pi (to rounding): +axis and -axis describe the same rotation
    for (int i = 0; i < 3; ++i) {
      if (std::abs(axis[i]) > 1e-12) {
        if (axis[i] < 0.0)
          axis = -axis;
        break;
      }
    }
  }
  return angle * axis;
}

double rotation_angle(const Rotation& r)
{
  const Eigen::Vector4d q = r.quaternion();
  return 2.0 * std::atan2(Vec3(q[1], q[2], q[3]).norm(), q[0]);
}

Vec3 centroid(std::span<const Vec3> x)
{
  Vec3 c = Vec3::Zero();
  for (const auto& p : x)
    c += p;
  return x.empty() ? c : Vec3(c / static_cast<double>(x.size()));
}

PointCloud apply_action(const RigidAction& a, std::span<const Vec3> x, const Vec3& pivot)
{
  PointCloud out;
  out.reserve(x.size());
  const Vec3 shift = pivot + a.tr.v;
  for (const auto& p : x)
    out.push_back(a.rot.m * (p - pivot) + shift);
  return out;
}

PointCloud apply_action(const RigidAction& a, std::span<const Vec3> x)
{
  return apply_action(a, x, centroid(x));
}

RigidAction compose(const RigidAction& a_new, const RigidAction& a_old)
{
  return {a_new.rot * a_old.rot, {a_old.tr.v + a_new.tr.v}};
}

PointCloud RigidMotion::operator()(std::span<const Vec3> x) const
{
  PointCloud out;
  out.reserve(x.size());
  for (const auto& p : x)
    out.push_back(rot * p + trans);
  return out;
}

namespace {

KabschResult kabsch_impl(std::span<const Vec3> p, std::span<const Vec3> q,
                         std::span<const std::size_t> idx)
{
  const std::size_t n = idx.size();
  Vec3 pc = Vec3::Zero(), qc = Vec3::Zero();
  for (auto i : idx) {
    pc += p[i];
    qc += q[i];
  }
  pc /= static_cast<double>(n);
  qc /= static_cast<double>(n);

  Mat3 h = Mat3::Zero();
  for (auto i : idx)
    h += (p[i] - pc) * (q[i] - qc).transpose();

  KabschResult res;
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  const double scale = std::max(s[0], 1e-300);
  // rank 1 (collinear) still has an optimal, if non-unique, rotation
  res.degenerate = s[0] < 1e-12 || s[1] < 1e-10 * scale;
  if (s[0] < 1e-12) {
    res.rot = Rotation::identity();
  } else {
    const Mat3 u = svd.matrixU();
    const Mat3 v = svd.matrixV();
    const double d = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
    Mat3 dm = Mat3::Identity();
    dm(2, 2) = d;
    res.rot.m = v * dm * u.transpose();
  }
  res.trans = qc - res.rot.m * pc;

  double ss = 0.0;
  for (auto i : idx)
    ss += (res.rot.m * p[i] + res.trans - q[i]).squaredNorm();
  res.rmsd = std::sqrt(ss / static_cast<double>(n));
  return res;
}

} // namespace

KabschResult kabsch_align(std::span<const Vec3> p, std::span<const Vec3> q)
{
  if (p.size() != q.size())
    throw InputError("kabsch_align: point clouds differ in size");
  if (p.size() < 3)
    throw InputError("kabsch_align: need at least 3 points");
  std::vector<std::size_t> idx(p.size());
  for (std::size_t i = 0; i < idx.size(); ++i)
    idx[i] = i;
  return kabsch_impl(p, q, idx);
}

KabschResult kabsch_align_subset(std::span<const Vec3> p, std::span<const Vec3> q,
                                 std::span<const std::size_t> subset)
{
  if (p.size() != q.size())
    throw InputError("kabsch_align: point clouds differ in size");
  if (subset.empty())
    throw InputError("kabsch_align: empty subset");
  return kabsch_impl(p, q, subset);
}

double rmsd(std::span<const Vec3> p, std::span<const Vec3> q)
{
  if (p.size() != q.size() || p.empty())
    throw InputError("rmsd: point clouds differ in size or are empty");
  double ss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i)
    ss += (p[i] - q[i]).squaredNorm();
  return std::sqrt(ss / static_cast<double>(p.size()));
}

double tm_d0(std::size_t length)
{
  if (length < 16)
    throw InputError("TM-score needs at least 16 residues, got " + std::to_string(length));
  return 1.24 * std::cbrt(static_cast<double>(length) - 15.0) - 1.8;
}

double tm_from_distances(std::span<const double> d, double d0)
{
  double s = 0.0;
  for (double di : d) {
    const double r = di / d0;
    s += 1.0 / (1.0 + r * r);
  }
  return s / static_cast<double>(d.size());
}

TmResult tm_score_points(std::span<const Vec3> pred, std::span<const Vec3> truth, int max_iter)
{
  if (pred.size() != truth.size())
    throw InputError("tm_score: residue counts differ");
  const double d0 = tm_d0(pred.size());
  const std::size_t n = pred.size();

  std::vector<double> dist(n);
  auto score_motion = [&](const RigidMotion& m) {
    for (std::size_t i = 0; i < n; ++i)
      dist[i] = (m(pred[i]) - truth[i]).norm();
    return tm_from_distances(dist, d0);
  };

  TmResult best;
  best.motion = kabsch_align(pred, truth).motion();
  best.score = score_motion(best.motion);

  std::vector<std::size_t> subset, previous;
  for (int it = 0; it < max_iter; ++it) {
    subset.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (dist[i] < d0)
        subset.push_back(i);
    if (subset.size() < 3 || subset == previous)
      break;
    const auto motion = kabsch_align_subset(pred, truth, subset).motion();
    const double s = score_motion(motion);
    best.iterations = it + 1;
    if (s > best.score) {
      best.score = s;
      best.motion = motion;
    }
    previous = subset;
  }
  return best;
}

} // namespace dockeq
