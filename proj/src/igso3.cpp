#include "dockeq/igso3.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numbers>

#include "dockeq/errors.hpp"

namespace dockeq::igso3 {

namespace {

constexpr double kPi = std::numbers::pi;

// 5-point Gauss-Legendre on [-1, 1]
constexpr std::array<double, 5> kGlNodes = {-0.9061798459386640, -0.5384693101056831, 0.0,
                                            0.5384693101056831, 0.9061798459386640};
constexpr std::array<double, 5> kGlWeights = {0.2369268850561891, 0.4786286704993665,
                                              0.5688888888888889, 0.4786286704993665,
                                              0.2369268850561891};

} // namespace

SeriesValue evaluate_l_series(double omega, double sigma, int l_max)
{
  const double s2 = sigma * sigma;
  if (omega < 1e-10) {
    double f0 = 0.0;
    for (int l = 0; l <= l_max; ++l) {
      const double n = 2.0 * l + 1.0;
      const double t = n * n * std::exp(-l * (l + 1.0) * s2);
      f0 += t;
      if (l >= 1 && t < 1e-12 * f0)
        break;
    }
    return {std::log(f0), 0.0};
  }

  const double sh = std::sin(0.5 * omega);
  const double ch = std::cos(0.5 * omega);
  double f = 0.0, fp = 0.0;
  for (int l = 0; l <= l_max; ++l) {
    const double n = 2.0 * l + 1.0;
    const double c = n * std::exp(-l * (l + 1.0) * s2);
    const double a = (l + 0.5) * omega;
    const double sa = std::sin(a);
    const double ca = std::cos(a);
    f += c * sa / sh;
    fp += c * ((l + 0.5) * ca * sh - 0.5 * sa * ch) / (sh * sh);
    if (l >= 1 && n * n * c < 1e-12 * std::abs(f))
      break;
  }
  if (!(f > 0.0))
    return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::quiet_NaN()};
  return {std::log(f), fp / f};
}

SeriesValue evaluate_dual(double omega, double sigma)
{
  // f(w) = sqrt(pi) e^{s^2/4} / (s^3 sin(w/2)) * sum_j [a_j e^{-a_j^2/s^2} - b_j e^{-b_j^2/s^2}]
  // with a_j = w/2 - 2 pi j, b_j = w/2 - pi - 2 pi j. Exponents are shifted by
  // the largest one, (w/2)^2 / s^2, so the sum stays O(1).
  const double s2 = sigma * sigma;
  const double th = 0.5 * omega;
  const double ref = th * th / s2;
  const int jmax = static_cast<int>(std::ceil((std::sqrt(ref + 60.0) * sigma + kPi) / (2.0 * kPi))) + 1;

  double sum = 0.0, dsum = 0.0;
  for (int j = -jmax; j <= jmax; ++j) {
    const double a = th - 2.0 * kPi * j;
    const double ea = std::exp(ref - a * a / s2);
    const double b = th - kPi - 2.0 * kPi * j;
    const double eb = std::exp(ref - b * b / s2);
    sum += a * ea - b * eb;
    dsum += (1.0 - 2.0 * a * a / s2) * ea - (1.0 - 2.0 * b * b / s2) * eb;
  }

  const double log_pref = 0.5 * std::log(kPi) + 0.25 * s2 - 3.0 * std::log(sigma);
  if (omega < 1e-10) // sum / sin(th) -> dsum at th = 0
    return {log_pref + std::log(dsum), 0.0};

  const double st = std::sin(th);
  SeriesValue v;
  v.log_f = log_pref - std::log(st) + std::log(sum) - ref;
  v.dlogf = 0.5 * (dsum / sum - std::cos(th) / st);
  return v;
}

SeriesValue evaluate(double omega, double sigma, int l_max)
{
  if (!(sigma > 0.0))
    throw InputError("IGSO(3) sigma must be positive");
  return sigma < kDualSigmaMax ? evaluate_dual(omega, sigma) : evaluate_l_series(omega, sigma, l_max);
}

double angle_density(double omega, double sigma)
{
  return (1.0 - std::cos(omega)) / kPi * std::exp(evaluate(omega, sigma).log_f);
}

std::vector<double> Table::log_grid(double lo, double hi, int n)
{
  if (!(lo > 0.0) || !(hi > lo) || n < 2)
    throw InputError("log_grid: need 0 < lo < hi and n >= 2");
  std::vector<double> g(n);
  const double a = std::log(lo), b = std::log(hi);
  for (int i = 0; i < n; ++i)
    g[i] = std::exp(a + (b - a) * i / (n - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

Table Table::build(std::vector<double> sigma_grid, int omega_resolution, int l_max)
{
  if (sigma_grid.empty())
    throw InputError("IGSO(3) table: empty sigma grid");
  for (std::size_t i = 0; i < sigma_grid.size(); ++i) {
    if (!(sigma_grid[i] > 0.0) || !std::isfinite(sigma_grid[i]))
      throw InputError("IGSO(3) table: sigma must be positive, got " + std::to_string(sigma_grid[i]));
    if (i > 0 && !(sigma_grid[i] > sigma_grid[i - 1]))
      throw InputError("IGSO(3) table: sigma grid must be strictly ascending");
  }
  if (omega_resolution < 256)
    throw InputError("IGSO(3) table: omega resolution must be >= 256");
  if (l_max < 1)
    throw InputError("IGSO(3) table: l_max must be >= 1");

  Table t;
  t.sigma_ = std::move(sigma_grid);
  t.l_max_ = l_max;
  const std::size_t n = static_cast<std::size_t>(omega_resolution);
  t.omega_.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double u = static_cast<double>(j) / static_cast<double>(n - 1);
    t.omega_[j] = kOmegaMin + (kPi - kOmegaMin) * u * u;
  }
  t.omega_.back() = kPi;

  const std::size_t rows = t.sigma_.size();
  t.log_f_.assign(rows * n, 0.0);
  t.dlogf_.assign(rows * n, 0.0);
  t.cdf_.assign(rows * n, 0.0);
  t.exp_norm_.assign(rows, 0.0);
  t.exp_sq_.assign(rows, 0.0);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t r = 0; r < rows; ++r) {
    const double sigma = t.sigma_[r];
    double mass = 0.0, m1 = 0.0, m2 = 0.0;
    auto integrate = [&](double lo, double hi) {
      const double half = 0.5 * (hi - lo), mid = 0.5 * (hi + lo);
      double cell = 0.0;
      for (std::size_t k = 0; k < kGlNodes.size(); ++k) {
        const double w = mid + half * kGlNodes[k];
        const auto v = evaluate(w, sigma, l_max);
        const double p = (1.0 - std::cos(w)) / kPi * std::exp(v.log_f);
        const double wp = kGlWeights[k] * half * p;
        cell += wp;
        m1 += wp * std::abs(v.dlogf);
        m2 += wp * v.dlogf * v.dlogf;
      }
      mass += cell;
    };

    double* lf = &t.log_f_[r * n];
    double* dl = &t.dlogf_[r * n];
    double* cd = &t.cdf_[r * n];
    for (std::size_t j = 0; j < n; ++j) {
      const auto v = evaluate(t.omega_[j], sigma, l_max);
      lf[j] = v.log_f;
      dl[j] = v.dlogf;
      integrate(j == 0 ? 0.0 : t.omega_[j - 1], t.omega_[j]);
      cd[j] = mass;
    }
    for (std::size_t j = 0; j < n; ++j)
      cd[j] /= mass;
    t.exp_norm_[r] = m1 / mass;
    t.exp_sq_[r] = m2 / mass;
  }

  for (std::size_t i = 0; i < t.log_f_.size(); ++i)
    if (!std::isfinite(t.log_f_[i]) || !std::isfinite(t.dlogf_[i]))
      throw NumericalError("IGSO(3) table: non-finite series value at sigma " +
                           std::to_string(t.sigma_[i / n]) + ", omega " + std::to_string(t.omega_[i % n]));
  return t;
}

double Table::f(std::size_t row, std::size_t j) const
{
  return std::exp(log_f(row, j));
}

double Table::density(std::size_t row, std::size_t j) const
{
  return (1.0 - std::cos(omega_[j])) / kPi * f(row, j);
}

bool Table::in_range(double sigma) const
{
  return !sigma_.empty() && sigma >= sigma_.front() * (1.0 - 1e-12) && sigma <= sigma_.back() * (1.0 + 1e-12);
}

void Table::check_sigma(double sigma) const
{
  if (!in_range(sigma))
    throw InputError("IGSO(3): sigma " + std::to_string(sigma) + " outside table range [" +
                     std::to_string(sigma_.empty() ? 0.0 : sigma_.front()) + ", " +
                     std::to_string(sigma_.empty() ? 0.0 : sigma_.back()) + "]");
}

std::tuple<std::size_t, std::size_t, double> Table::bracket(double sigma) const
{
  check_sigma(sigma);
  if (sigma <= sigma_.front())
    return {0, 0, 0.0};
  if (sigma >= sigma_.back())
    return {rows() - 1, rows() - 1, 0.0};
  const auto it = std::lower_bound(sigma_.begin(), sigma_.end(), sigma);
  const std::size_t hi = static_cast<std::size_t>(it - sigma_.begin());
  if (*it == sigma)
    return {hi, hi, 0.0};
  const std::size_t lo = hi - 1;
  const double w = (std::log(sigma) - std::log(sigma_[lo])) / (std::log(sigma_[hi]) - std::log(sigma_[lo]));
  return {lo, hi, w};
}

double Table::row_inverse_cdf(std::size_t row, double u) const
{
  const double* cd = &cdf_[row * cols()];
  const std::size_t n = cols();
  if (u <= cd[0]) // p ~ w^2 below the first node
    return cd[0] > 0.0 ? omega_[0] * std::cbrt(u / cd[0]) : omega_[0];
  if (u >= cd[n - 1])
    return omega_[n - 1];
  const std::size_t j = static_cast<std::size_t>(std::upper_bound(cd, cd + n, u) - cd);
  const double c0 = cd[j - 1], c1 = cd[j];
  if (c1 <= c0)
    return omega_[j - 1];
  const double t = (u - c0) / (c1 - c0);
  return omega_[j - 1] + t * (omega_[j] - omega_[j - 1]);
}

double Table::inverse_cdf(double sigma, double u) const
{
  const auto [lo, hi, w] = bracket(sigma);
  u = std::clamp(u, 0.0, 1.0);
  const double a = row_inverse_cdf(lo, u);
  if (lo == hi)
    return a;
  return (1.0 - w) * a + w * row_inverse_cdf(hi, u);
}

double Table::dlogf_interp(double omega, double sigma) const
{
  const auto [lo, hi, w] = bracket(sigma);
  omega = std::clamp(omega, omega_.front(), omega_.back());
  std::size_t j = static_cast<std::size_t>(std::upper_bound(omega_.begin(), omega_.end(), omega) - omega_.begin());
  j = std::clamp<std::size_t>(j, 1, cols() - 1);
  const double t = (omega - omega_[j - 1]) / (omega_[j] - omega_[j - 1]);
  auto row_val = [&](std::size_t r) { return (1.0 - t) * dlogf(r, j - 1) + t * dlogf(r, j); };
  const double a = row_val(lo);
  return lo == hi ? a : (1.0 - w) * a + w * row_val(hi);
}

double Table::expected_score_norm(double sigma) const
{
  const auto [lo, hi, w] = bracket(sigma);
  return (1.0 - w) * exp_norm_[lo] + w * exp_norm_[hi];
}

double Table::expected_score_sq_norm(double sigma) const
{
  const auto [lo, hi, w] = bracket(sigma);
  return (1.0 - w) * exp_sq_[lo] + w * exp_sq_[hi];
}

Rotation Table::sample_rotation(double sigma, double u, const Vec3& axis) const
{
  return axis_angle_to_matrix(inverse_cdf(sigma, u) * axis);
}

Rotation Table::sample_rotation(double sigma, Rng& rng) const
{
  const double u = rng.uniform();
  const Vec3 axis = rng.unit_vector();
  return sample_rotation(sigma, u, axis);
}

Vec3 Table::rotation_score(double sigma, const Rotation& r_delta) const
{
  check_sigma(sigma);
  const Vec3 v = matrix_to_axis_angle(r_delta);
  const double w = v.norm();
  if (w < 1e-12)
    return Vec3::Zero();
  return evaluate(w, sigma, l_max_).dlogf * (v / w);
}

// ---------------------------------------------------------------------------
// Cache file: "IGSO3v1\0", then little-endian u64 key, u32 rows, u32 cols,
// u32 l_max, and f64 arrays sigma[rows], omega[cols], log_f, dlogf, cdf
// (rows*cols each), exp_norm[rows], exp_sq[rows].

namespace {

constexpr char kMagic[8] = {'I', 'G', 'S', 'O', '3', 'v', '1', '\0'};

template <typename T>
T to_little(T v)
{
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    std::reverse(b, b + sizeof(T));
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

template <typename T>
void put(std::ostream& os, T v)
{
  v = to_little(v);
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is)
{
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is)
    throw InputError("IGSO(3) cache: truncated file");
  return to_little(v);
}

void put_array(std::ostream& os, const std::vector<double>& a)
{
  for (double x : a)
    put(os, x);
}

std::vector<double> get_array(std::istream& is, std::size_t n)
{
  std::vector<double> a(n);
  for (auto& x : a)
    x = get<double>(is);
  return a;
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t len)
{
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t make_key(const std::vector<double>& sigma, std::size_t cols, int l_max)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double s : sigma) {
    const auto bits = to_little(std::bit_cast<std::uint64_t>(s));
    h = fnv1a(h, &bits, sizeof bits);
  }
  const auto c = to_little(static_cast<std::uint64_t>(cols));
  const auto l = to_little(static_cast<std::uint64_t>(l_max));
  h = fnv1a(h, &c, sizeof c);
  return fnv1a(h, &l, sizeof l);
}

} // namespace

std::uint64_t Table::key() const
{
  return make_key(sigma_, cols(), l_max_);
}

void Table::save(const std::filesystem::path& path) const
{
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os)
      throw InputError("IGSO(3) cache: cannot write " + tmp);
    os.write(kMagic, sizeof kMagic);
    put(os, key());
    put(os, static_cast<std::uint32_t>(rows()));
    put(os, static_cast<std::uint32_t>(cols()));
    put(os, static_cast<std::uint32_t>(l_max_));
    put_array(os, sigma_);
    put_array(os, omega_);
    put_array(os, log_f_);
    put_array(os, dlogf_);
    put_array(os, cdf_);
    put_array(os, exp_norm_);
    put_array(os, exp_sq_);
    if (!os)
      throw InputError("IGSO(3) cache: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Table Table::load(const std::filesystem::path& path)
{
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw InputError("IGSO(3) cache: cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw InputError("IGSO(3) cache: bad magic in " + path.string());
  Table t;
  const auto key = get<std::uint64_t>(is);
  const auto rows = get<std::uint32_t>(is);
  const auto cols = get<std::uint32_t>(is);
  t.l_max_ = static_cast<int>(get<std::uint32_t>(is));
  t.sigma_ = get_array(is, rows);
  t.omega_ = get_array(is, cols);
  t.log_f_ = get_array(is, std::size_t{rows} * cols);
  t.dlogf_ = get_array(is, std::size_t{rows} * cols);
  t.cdf_ = get_array(is, std::size_t{rows} * cols);
  t.exp_norm_ = get_array(is, rows);
  t.exp_sq_ = get_array(is, rows);
  if (t.key() != key)
    throw InputError("IGSO(3) cache: key mismatch in " + path.string());
  return t;
}

Table Table::load_or_build(const std::filesystem::path& path, std::vector<double> sigma_grid,
                           int omega_resolution, int l_max)
{
  const auto want = make_key(sigma_grid, static_cast<std::size_t>(omega_resolution), l_max);
  if (std::filesystem::exists(path)) {
    try {
      Table t = load(path);
      if (t.key() == want)
        return t;
    } catch (const InputError&) {
      // stale or corrupt cache: rebuild below
    }
  }
  Table t = build(std::move(sigma_grid), omega_resolution, l_max);
  t.save(path);
  return t;
}

} // namespace dockeq::igso3
