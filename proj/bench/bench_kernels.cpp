// Serial reference vs OpenMP pair kernels on two random clouds of n residues.
#include <benchmark/benchmark.h>

#include "dockeq/kernels.hpp"
#include "dockeq/potential.hpp"
#include "dockeq/rng.hpp"

using namespace dockeq;

namespace {

std::vector<Vec3> cloud(std::size_t n, std::uint64_t seed, double shift)
{
  Rng rng(seed);
  std::vector<Vec3> x(n);
  for (auto& v : x)
    v = 12.0 * rng.normal3() + Vec3(shift, 0, 0);
  return x;
}

const ContactPotential& contact()
{
  static const ContactPotential f;
  return f;
}

auto contact_term()
{
  return [](double d, std::size_t, std::size_t) {
    return kernels::PairTerm{contact().pair_energy(d), contact().pair_derivative(d)};
  };
}

template <bool Parallel>
void BM_pair_sum(benchmark::State& st)
{
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto a = cloud(n, 1, 0.0), b = cloud(n, 2, 15.0);
  std::vector<Vec3> grad(n);
  for (auto _ : st) {
    std::fill(grad.begin(), grad.end(), Vec3::Zero());
    double v = Parallel ? kernels::omp::pair_sum(a, b, contact_term(), grad.data())
                        : kernels::serial::pair_sum(a, b, contact_term(), grad.data());
    benchmark::DoNotOptimize(v);
  }
  st.SetItemsProcessed(st.iterations() * static_cast<int64_t>(n * n));
}

template <bool Parallel>
void BM_histogram(benchmark::State& st)
{
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto a = cloud(n, 3, 0.0), b = cloud(n, 4, 15.0);
  const SurrogatePotential s(32, 40.0, false);
  std::vector<double> hist(s.bins());
  auto basis = [&](double d, std::size_t& first, double* vals) { return s.basis(d, first, vals); };
  auto channel = [](std::size_t, std::size_t) { return std::size_t{0}; };
  for (auto _ : st) {
    std::fill(hist.begin(), hist.end(), 0.0);
    if (Parallel)
      kernels::omp::histogram(a, b, s.bins(), basis, channel, hist);
    else
      kernels::serial::histogram(a, b, s.bins(), basis, channel, hist);
    benchmark::DoNotOptimize(hist.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<int64_t>(n * n));
}

template <bool Parallel>
void BM_min_distance(benchmark::State& st)
{
  const auto n = static_cast<std::size_t>(st.range(0));
  const auto a = cloud(n, 5, 0.0), b = cloud(n, 6, 15.0);
  for (auto _ : st) {
    auto m = Parallel ? kernels::omp::min_distance(a, b) : kernels::serial::min_distance(a, b);
    benchmark::DoNotOptimize(m);
  }
  st.SetItemsProcessed(st.iterations() * static_cast<int64_t>(n * n));
}

} // namespace

BENCHMARK(BM_pair_sum<false>)->Name("pair_sum/serial")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_pair_sum<true>)->Name("pair_sum/omp")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_histogram<false>)->Name("histogram/serial")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_histogram<true>)->Name("histogram/omp")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_min_distance<false>)->Name("min_distance/serial")->RangeMultiplier(4)->Range(64, 4096);
BENCHMARK(BM_min_distance<true>)->Name("min_distance/omp")->RangeMultiplier(4)->Range(64, 4096);

BENCHMARK_MAIN();
