#include <random>

#include <benchmark/benchmark.h>

#include "froda/linalg.hpp"

namespace {

froda::Matrix gaussian(Eigen::Index rows, Eigen::Index cols, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  froda::Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

// B is D x 2d, X is D x n with n = range(1)
void BM_GroupLasso(benchmark::State& state) {
  const auto d = state.range(0), n = state.range(1);
  const froda::Matrix B = gaussian(500, 2 * d, 1);
  const froda::Matrix X = gaussian(500, n, 2);
  const auto groups = froda::GroupSpec::uniform(2, d);
  const froda::SolverConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(froda::group_lasso_solve(X, B, groups, 0.001, cfg));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_GroupLasso)->Args({5, 100})->Args({20, 300})->Unit(benchmark::kMillisecond);

void BM_DictionaryUpdate(benchmark::State& state) {
  const auto k = state.range(0);
  const froda::Matrix A = gaussian(500, 300, 3);
  const froda::Matrix T = 0.2 * gaussian(k, 300, 4);
  const froda::SolverConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(froda::dictionary_update(A, T, cfg));
}
BENCHMARK(BM_DictionaryUpdate)->Arg(5)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_Pca(benchmark::State& state) {
  const froda::Matrix X = gaussian(500, 800, 5);
  for (auto _ : state) benchmark::DoNotOptimize(froda::pca_basis(X, froda::PcaRequest::fraction(0.99)));
}
BENCHMARK(BM_Pca)->Unit(benchmark::kMillisecond);

}  // namespace
