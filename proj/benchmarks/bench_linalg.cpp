#include <benchmark/benchmark.h>

#include <random>

#include "reprocs/linalg.hpp"

namespace {

using namespace reprocs;

Matrix gaussian(Index rows, Index cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = nd(rng);
  return m;
}

// Rank-r basis of dimension n absorbing a batch of alpha columns.
void BM_IncSvd(benchmark::State& state) {
  const Index n = state.range(0), r = state.range(1), alpha = 20;
  const SvdBasis base = left_svd(gaussian(n, r, 1));
  const Matrix d = gaussian(n, alpha, 2);
  for (auto _ : state) benchmark::DoNotOptimize(inc_svd(base.basis, base.spectrum, d));
}
BENCHMARK(BM_IncSvd)->Args({100, 20})->Args({500, 20})->Args({6480, 20});

void BM_ApproxBasis(benchmark::State& state) {
  const Matrix m = gaussian(state.range(0), state.range(1), 3);
  for (auto _ : state) benchmark::DoNotOptimize(approx_basis_energy(m, 99.99));
}
BENCHMARK(BM_ApproxBasis)->Args({100, 2000})->Args({500, 2000});

void BM_PerpProject(benchmark::State& state) {
  const Index n = state.range(0);
  const PerpProjector p(left_svd(gaussian(n, 20, 4)).basis);
  const Vector v = gaussian(n, 1, 5);
  for (auto _ : state) benchmark::DoNotOptimize(perp_project(p, v));
}
BENCHMARK(BM_PerpProject)->Arg(100)->Arg(6480);

}  // namespace
