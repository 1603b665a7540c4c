#include <benchmark/benchmark.h>

#include <random>

#include "reprocs/linalg.hpp"
#include "reprocs/operator.hpp"
#include "reprocs/sparse.hpp"

namespace {

using namespace reprocs;

// One constrained l1 solve of the shape seen per frame: y = Phi (s + l) with
// Phi = I - PP', a 9-sparse s and a small residual budget.
void BM_SolveWeightedL1(benchmark::State& state) {
  const Index n = state.range(0), r = 20, k = state.range(1);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  Matrix g(n, r);
  for (Index j = 0; j < r; ++j)
    for (Index i = 0; i < n; ++i) g(i, j) = nd(rng);
  const BasisMatrix p(left_svd(g).basis);
  const PerpProjector perp(p);
  const ProjectorOperator phi(perp);
  Vector s = Vector::Zero(n);
  for (Index i = 0; i < k; ++i) s[(i * 7) % n] = 100.0;
  Vector noise(n);
  for (Index i = 0; i < n; ++i) noise[i] = nd(rng);
  const Vector y = perp_project(perp, Vector(s + noise));
  const L1Problem prob{&phi, y, perp_project(perp, noise).norm(), {}, 1.0};
  for (auto _ : state) benchmark::DoNotOptimize(solve_weighted_l1(prob));
}
BENCHMARK(BM_SolveWeightedL1)->Args({100, 9})->Args({100, 27})->Args({500, 45})->Unit(benchmark::kMillisecond);

}  // namespace
