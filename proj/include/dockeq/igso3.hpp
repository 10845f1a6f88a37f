#pragma once

#include <cstdint>
#include <filesystem>
#include <tuple>
#include <vector>

#include "dockeq/geom.hpp"
#include "dockeq/rng.hpp"

namespace dockeq::igso3 {

/// Angle density of the isotropic Gaussian on SO(3),
///   f(w; s) = sum_l (2l+1) exp(-l(l+1) s^2) sin((l+1/2) w) / sin(w/2),
///   p(w; s) = (1 - cos w) / pi * f(w; s).
/// For s < kDualSigmaMax the same function is evaluated through its
/// Poisson-dual (theta function) form, which stays positive and accurate where
/// the direct series cancels catastrophically. Values are returned in log
/// space because f underflows for small s at large angles.
struct SeriesValue
{
  double log_f = 0.0;
  double dlogf = 0.0; ///< d/dw log f
};

inline constexpr double kDualSigmaMax = 1.0;
inline constexpr int kDefaultLMax = 2000;
inline constexpr int kDefaultOmegaResolution = 2048;
inline constexpr double kOmegaMin = 1e-4;

SeriesValue evaluate(double omega, double sigma, int l_max = kDefaultLMax);

/// Direct truncated l-series (adaptive stop at 1e-12 relative term size).
SeriesValue evaluate_l_series(double omega, double sigma, int l_max = kDefaultLMax);

/// Poisson-dual form of the same series.
SeriesValue evaluate_dual(double omega, double sigma);

/// p(w; s), the density of the rotation angle.
double angle_density(double omega, double sigma);

/// Precomputed grids of the IGSO(3) angle distribution, one row per sigma.
/// Rows are independent; the omega grid is shared and denser near zero.
class Table
{
public:
  Table() = default;

  /// Throws InputError on sigma <= 0, unsorted grids, resolution < 256 or
  /// l_max < 1. Rows are built in parallel.
  static Table build(std::vector<double> sigma_grid,
                     int omega_resolution = kDefaultOmegaResolution,
                     int l_max = kDefaultLMax);

  /// `n` log-spaced values in [lo, hi].
  static std::vector<double> log_grid(double lo, double hi, int n);

  /// Loads the cache at `path` when its key matches, otherwise builds and
  /// writes it. The cache is an optimisation only.
  static Table load_or_build(const std::filesystem::path& path, std::vector<double> sigma_grid,
                             int omega_resolution = kDefaultOmegaResolution,
                             int l_max = kDefaultLMax);

  void save(const std::filesystem::path& path) const;
  static Table load(const std::filesystem::path& path);

  std::uint64_t key() const;

  const std::vector<double>& sigma_grid() const { return sigma_; }
  const std::vector<double>& omega_grid() const { return omega_; }
  int l_max() const { return l_max_; }
  std::size_t rows() const { return sigma_.size(); }
  std::size_t cols() const { return omega_.size(); }

  double log_f(std::size_t row, std::size_t j) const { return log_f_[row * cols() + j]; }
  double f(std::size_t row, std::size_t j) const;
  double dlogf(std::size_t row, std::size_t j) const { return dlogf_[row * cols() + j]; }
  double cdf(std::size_t row, std::size_t j) const { return cdf_[row * cols() + j]; }
  /// p(w_j; sigma_row).
  double density(std::size_t row, std::size_t j) const;
  double exp_score_norm(std::size_t row) const { return exp_norm_[row]; }
  double exp_score_sq_norm(std::size_t row) const { return exp_sq_[row]; }

  bool in_range(double sigma) const;

  /// Inverse CDF by monotone linear interpolation; between sigma rows the two
  /// row quantiles are interpolated linearly in log sigma.
  double inverse_cdf(double sigma, double u) const;

  /// d/dw log f interpolated from the table (linear in w, linear in log sigma).
  double dlogf_interp(double omega, double sigma) const;

  /// E|d/dw log f| under p(.; sigma), interpolated linearly in log sigma.
  double expected_score_norm(double sigma) const;
  /// E[(d/dw log f)^2] under p(.; sigma).
  double expected_score_sq_norm(double sigma) const;

  /// Rotation by angle inverse_cdf(u) about `axis` (unit vector).
  Rotation sample_rotation(double sigma, double u, const Vec3& axis) const;
  Rotation sample_rotation(double sigma, Rng& rng) const;

  /// Score of the kernel centred at the identity, evaluated at `r_delta`:
  /// (d/dw log f)(w) * w_hat. Uses the series at the exact sigma.
  Vec3 rotation_score(double sigma, const Rotation& r_delta) const;

private:
  void check_sigma(double sigma) const;
  /// Bracketing rows and weight on the upper row (log sigma).
  std::tuple<std::size_t, std::size_t, double> bracket(double sigma) const;
  double row_inverse_cdf(std::size_t row, double u) const;

  std::vector<double> sigma_;
  std::vector<double> omega_;
  int l_max_ = kDefaultLMax;
  std::vector<double> log_f_;
  std::vector<double> dlogf_;
  std::vector<double> cdf_;
  std::vector<double> exp_norm_;
  std::vector<double> exp_sq_;
};

/// Free-function spellings of the table operations.
inline Table build_table(std::vector<double> sigma_grid, int omega_resolution = kDefaultOmegaResolution,
                         int l_max = kDefaultLMax)
{
  return Table::build(std::move(sigma_grid), omega_resolution, l_max);
}

inline Rotation sample_rotation(const Table& t, double sigma, double u, const Vec3& axis)
{
  return t.sample_rotation(sigma, u, axis);
}

inline TangentVector rotation_score(const Table& t, double sigma, const Rotation& r_delta)
{
  return {t.rotation_score(sigma, r_delta), Vec3::Zero()};
}

inline double expected_score_norm(const Table& t, double sigma) { return t.expected_score_norm(sigma); }

} // namespace dockeq::igso3
