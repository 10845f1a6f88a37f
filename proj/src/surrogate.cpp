#include "dockeq/potential.hpp"

#include <cmath>
#include <fstream>

#include "dockeq/errors.hpp"
#include "dockeq/kernels.hpp"

namespace dockeq {

namespace {

double bspline(double u)
{
  const double a = std::abs(u);
  if (a < 1.0)
    return 2.0 / 3.0 - a * a + 0.5 * a * a * a;
  if (a < 2.0) {
    const double r = 2.0 - a;
    return r * r * r / 6.0;
  }
  return 0.0;
}

double bspline_deriv(double u)
{
  const double a = std::abs(u);
  if (a < 1.0)
    return -2.0 * u + 1.5 * u * a;
  if (a < 2.0) {
    const double r = 2.0 - a;
    return (u > 0.0 ? -0.5 : 0.5) * r * r;
  }
  return 0.0;
}

} // namespace

std::size_t residue_type_pair(int a, int b)
{
  const std::size_t lo = static_cast<std::size_t>(std::min(a, b));
  const std::size_t hi = static_cast<std::size_t>(std::max(a, b));
  const std::size_t n = kNumResidueTypes;
  return lo * (2 * n - lo + 1) / 2 + (hi - lo);
}

SurrogatePotential::SurrogatePotential(std::size_t bins, double max_distance, bool restype_channels)
    : restype_channels_(restype_channels)
{
  if (bins < 1 || !(max_distance > 0.0))
    throw InputError("surrogate: need bins >= 1 and max_distance > 0");
  edges_.resize(bins + 1);
  width_ = max_distance / static_cast<double>(bins);
  for (std::size_t k = 0; k <= bins; ++k)
    edges_[k] = width_ * static_cast<double>(k);
  weights_.assign(num_features(), 0.0);
}

void SurrogatePotential::set_weights(std::vector<double> w)
{
  if (w.size() != num_features())
    throw InputError("surrogate: expected " + std::to_string(num_features()) + " weights, got " +
                     std::to_string(w.size()));
  weights_ = std::move(w);
}

std::size_t SurrogatePotential::type_pair(int a, int b) const
{
  return restype_channels_ ? residue_type_pair(a, b) : 0;
}

int SurrogatePotential::basis(double d, std::size_t& first, double* vals) const
{
  const long nb = static_cast<long>(bins());
  const double x = (d - edges_[0]) / width_ - 0.5; // position in units of bin centres
  const long k0 = static_cast<long>(std::floor(x)) - 1;
  const long lo = std::max(k0, 0L), hi = std::min(k0 + 3, nb - 1);
  if (lo > hi)
    return 0;
  first = static_cast<std::size_t>(lo);
  int n = 0;
  for (long k = lo; k <= hi; ++k)
    vals[n++] = bspline(x - static_cast<double>(k));
  return n;
}

int SurrogatePotential::basis_derivative(double d, std::size_t& first, double* vals) const
{
  const long nb = static_cast<long>(bins());
  const double x = (d - edges_[0]) / width_ - 0.5;
  const long k0 = static_cast<long>(std::floor(x)) - 1;
  const long lo = std::max(k0, 0L), hi = std::min(k0 + 3, nb - 1);
  if (lo > hi)
    return 0;
  first = static_cast<std::size_t>(lo);
  int n = 0;
  for (long k = lo; k <= hi; ++k)
    vals[n++] = bspline_deriv(x - static_cast<double>(k)) / width_;
  return n;
}

std::vector<double> SurrogatePotential::features(const AssemblyState& s) const
{
  std::vector<double> h(num_features(), 0.0);
  auto basis_fn = [this](double d, std::size_t& first, double* vals) { return basis(d, first, vals); };
  for (std::size_t i = 0; i < s.num_chains(); ++i)
    for (std::size_t j = i + 1; j < s.num_chains(); ++j) {
      const auto& ti = s.chains[i].restypes;
      const auto& tj = s.chains[j].restypes;
      auto channel = [&](std::size_t a, std::size_t b) { return type_pair(ti[a], tj[b]); };
      kernels::omp::histogram(s.chains[i].coords, s.chains[j].coords, bins(), basis_fn, channel, h);
    }
  return h;
}

double SurrogatePotential::evaluate(const AssemblyState& s) const
{
  double e = 0.0;
  for (std::size_t i = 0; i < s.num_chains(); ++i)
    for (std::size_t j = i + 1; j < s.num_chains(); ++j) {
      const auto& ti = s.chains[i].restypes;
      const auto& tj = s.chains[j].restypes;
      auto term = [&](double d, std::size_t a, std::size_t b) {
        double vals[4];
        std::size_t first = 0;
        const int n = basis(d, first, vals);
        const double* w = &weights_[type_pair(ti[a], tj[b]) * bins() + first];
        double v = 0.0;
        for (int k = 0; k < n; ++k)
          v += w[k] * vals[k];
        return kernels::PairTerm{v, 0.0};
      };
      e += kernels::omp::pair_sum(s.chains[i].coords, s.chains[j].coords, term);
    }
  return e;
}

bool SurrogatePotential::coordinate_gradient(const AssemblyState& s, std::size_t chain, std::vector<Vec3>& out) const
{
  const auto& ci = s.chains[chain];
  out.assign(ci.size(), Vec3::Zero());
  for (std::size_t j = 0; j < s.num_chains(); ++j) {
    if (j == chain)
      continue;
    const auto& tj = s.chains[j].restypes;
    auto term = [&](double d, std::size_t a, std::size_t b) {
      double vals[4];
      std::size_t first = 0;
      const int n = basis_derivative(d, first, vals);
      const double* w = &weights_[type_pair(ci.restypes[a], tj[b]) * bins() + first];
      double g = 0.0;
      for (int k = 0; k < n; ++k)
        g += w[k] * vals[k];
      return kernels::PairTerm{0.0, g};
    };
    kernels::omp::pair_sum(ci.coords, s.chains[j].coords, term, out.data());
  }
  return true;
}

nlohmann::json SurrogatePotential::to_json() const
{
  return {{"format_version", kFormatVersion},
          {"kind", "soft_distance_histogram"},
          {"kernel", "cubic_bspline"},
          {"bin_edges", edges_},
          {"restype_channels", restype_channels_},
          {"weights", weights_}};
}

SurrogatePotential SurrogatePotential::from_json(const nlohmann::json& j)
{
  try {
    if (j.at("format_version").get<int>() != kFormatVersion)
      throw InputError("surrogate: unsupported format_version " + j.at("format_version").dump());
    const auto edges = j.at("bin_edges").get<std::vector<double>>();
    if (edges.size() < 2 || edges.front() != 0.0)
      throw InputError("surrogate: bin_edges must start at 0 and have at least 2 entries");
    const double w = edges[1] - edges[0];
    for (std::size_t k = 1; k < edges.size(); ++k)
      if (std::abs(edges[k] - edges[k - 1] - w) > 1e-9 * std::max(1.0, edges.back()))
        throw InputError("surrogate: bin_edges must be uniformly spaced");
    SurrogatePotential s(edges.size() - 1, edges.back(), j.at("restype_channels").get<bool>());
    s.edges_ = edges;
    s.set_weights(j.at("weights").get<std::vector<double>>());
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("surrogate JSON: ") + e.what());
  }
}

void SurrogatePotential::save(const std::filesystem::path& path) const
{
  std::ofstream os(path);
  if (!os)
    throw InputError("cannot write " + path.string());
  os << to_json().dump(1) << '\n';
}

SurrogatePotential SurrogatePotential::load(const std::filesystem::path& path)
{
  std::ifstream is(path);
  if (!is)
    throw InputError("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

// ---------------------------------------------------------------------------

double softplus(double x)
{
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double ranking_loss(const Potential& f, std::span<const StatePair> pairs)
{
  if (pairs.empty())
    throw InputError("ranking_loss: empty pair list");
  double s = 0.0;
  for (const auto& p : pairs)
    s += softplus(-(f.evaluate(p.high) - f.evaluate(p.low)));
  return s / static_cast<double>(pairs.size());
}

double ranking_loss_linear(std::span<const double> weights, const std::vector<std::vector<double>>& diffs,
                           std::vector<double>* grad)
{
  if (diffs.empty())
    throw InputError("ranking_loss: empty pair list");
  if (grad)
    grad->assign(weights.size(), 0.0);
  double s = 0.0;
  const double inv = 1.0 / static_cast<double>(diffs.size());
  for (const auto& d : diffs) {
    double z = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k)
      z += weights[k] * d[k];
    s += softplus(-z);
    if (grad) {
      // d/dz softplus(-z) = -sigmoid(-z)
      const double c = -inv / (1.0 + std::exp(z));
      for (std::size_t k = 0; k < weights.size(); ++k)
        (*grad)[k] += c * d[k];
    }
  }
  return s * inv;
}

CorrelationReport surrogate_vs_truth_report(const Potential& learned, const Potential& truth,
                                            std::span<const StatePair> pairs)
{
  if (pairs.size() < 10)
    throw InputError("surrogate_vs_truth_report: need at least 10 pairs");
  std::vector<double> a, b;
  for (const auto& p : pairs) {
    a.push_back(learned.evaluate(p.high) - learned.evaluate(p.low));
    b.push_back(truth.evaluate(p.high) - truth.evaluate(p.low));
  }
  const double n = static_cast<double>(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
    const int sa = (a[i] > 0) - (a[i] < 0);
    const int sb = (b[i] > 0) - (b[i] < 0);
    agree += sa == sb;
  }
  CorrelationReport r;
  r.pairs = a.size();
  r.pearson_r = (saa > 0.0 && sbb > 0.0) ? sab / std::sqrt(saa * sbb) : 0.0;
  r.sign_agreement = static_cast<double>(agree) / n;
  return r;
}

} // namespace dockeq
