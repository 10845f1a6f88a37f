#pragma once

// Inter-chain pair kernels. Each kernel has a serial reference in
// kernels::serial and an OpenMP version in kernels::omp. The OpenMP versions
// accumulate per-row (or per-block) partials and combine them in index order,
// so their results do not depend on the thread count.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "dockeq/geom.hpp"

namespace dockeq::kernels {

/// Value and d/dd of a pair term at distance d.
struct PairTerm
{
  double value = 0.0;
  double deriv = 0.0;
};

struct MinPair
{
  double dist = std::numeric_limits<double>::infinity();
  std::size_t ia = 0;
  std::size_t ib = 0;
};

/// Below this many pairs the OpenMP kernels run on one thread.
inline constexpr std::size_t kParallelPairThreshold = 4096;

namespace detail {

template <typename Term>
inline double row_sum(std::span<const Vec3> a, std::span<const Vec3> b, std::size_t i, Term& term,
                      Vec3* grad_a)
{
  double v = 0.0;
  Vec3 g = Vec3::Zero();
  for (std::size_t j = 0; j < b.size(); ++j) {
    const Vec3 diff = a[i] - b[j];
    const double d = diff.norm();
    const PairTerm pt = term(d, i, j);
    v += pt.value;
    if (grad_a && d > 0.0)
      g += (pt.deriv / d) * diff;
  }
  if (grad_a)
    grad_a[i] += g;
  return v;
}

} // namespace detail

namespace serial {

/// sum_{i in a, j in b} term(|a_i - b_j|). If grad_a is non-null it must hold
/// |a| entries; d/da_i of the sum is added to it.
template <typename Term>
double pair_sum(std::span<const Vec3> a, std::span<const Vec3> b, Term&& term, Vec3* grad_a = nullptr)
{
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      const Vec3 diff = a[i] - b[j];
      const double d = diff.norm();
      const PairTerm pt = term(d, i, j);
      total += pt.value;
      if (grad_a && d > 0.0)
        grad_a[i] += (pt.deriv / d) * diff;
    }
  return total;
}

/// hist[channel(i, j) * bins + k] += basis_k(|a_i - b_j|) for every pair.
/// `basis(d, out_first, out_values)` writes up to 4 consecutive nonzero basis
/// values starting at bin out_first and returns their count.
template <typename Basis, typename Channel>
void histogram(std::span<const Vec3> a, std::span<const Vec3> b, std::size_t bins, Basis&& basis,
               Channel&& channel, std::span<double> hist)
{
  double vals[4];
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      std::size_t first = 0;
      const int n = basis((a[i] - b[j]).norm(), first, vals);
      const std::size_t off = channel(i, j) * bins;
      for (int k = 0; k < n; ++k)
        hist[off + first + k] += vals[k];
    }
}

inline MinPair min_distance(std::span<const Vec3> a, std::span<const Vec3> b)
{
  MinPair m;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = (a[i] - b[j]).norm();
      if (d < m.dist)
        m = {d, i, j};
    }
  return m;
}

} // namespace serial

namespace omp {

template <typename Term>
double pair_sum(std::span<const Vec3> a, std::span<const Vec3> b, Term&& term, Vec3* grad_a = nullptr)
{
  const std::size_t n = a.size();
  std::vector<double> rows(n, 0.0);
  const bool par = n * b.size() >= kParallelPairThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < n; ++i)
    rows[i] = detail::row_sum(a, b, i, term, grad_a);
  double total = 0.0;
  for (double r : rows)
    total += r;
  return total;
}

template <typename Basis, typename Channel>
void histogram(std::span<const Vec3> a, std::span<const Vec3> b, std::size_t bins, Basis&& basis,
               Channel&& channel, std::span<double> hist)
{
  constexpr std::size_t kBlock = 16;
  const std::size_t nblocks = (a.size() + kBlock - 1) / kBlock;
  if (nblocks <= 1 || a.size() * b.size() < kParallelPairThreshold) {
    serial::histogram(a, b, bins, basis, channel, hist);
    return;
  }
  std::vector<std::vector<double>> partial(nblocks);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t blk = 0; blk < nblocks; ++blk) {
    auto& h = partial[blk];
    h.assign(hist.size(), 0.0);
    const std::size_t lo = blk * kBlock, hi = std::min(a.size(), lo + kBlock);
    double vals[4];
    for (std::size_t i = lo; i < hi; ++i)
      for (std::size_t j = 0; j < b.size(); ++j) {
        std::size_t first = 0;
        const int cnt = basis((a[i] - b[j]).norm(), first, vals);
        const std::size_t off = channel(i, j) * bins;
        for (int k = 0; k < cnt; ++k)
          h[off + first + k] += vals[k];
      }
  }
  for (const auto& h : partial)
    for (std::size_t k = 0; k < hist.size(); ++k)
      hist[k] += h[k];
}

inline MinPair min_distance(std::span<const Vec3> a, std::span<const Vec3> b)
{
  const std::size_t n = a.size();
  std::vector<MinPair> rows(n);
  const bool par = n * b.size() >= kParallelPairThreshold;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t i = 0; i < n; ++i) {
    MinPair m;
    for (std::size_t j = 0; j < b.size(); ++j) {
      const double d = (a[i] - b[j]).norm();
      if (d < m.dist)
        m = {d, i, j};
    }
    rows[i] = m;
  }
  MinPair best;
  for (const auto& m : rows)
    if (m.dist < best.dist)
      best = m;
  return best;
}

} // namespace omp

} // namespace dockeq::kernels
