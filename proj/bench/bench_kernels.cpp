// Serial reference kernels against their OpenMP versions.
// Range argument: problem size (matrix side, or missing-cell count).

#include <trcm/kernels.hpp>

#include <benchmark/benchmark.h>

#include <random>

using namespace trcm;

namespace {

Matrix gaussian(Index n, Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Matrix m(n, p);
  for (Index k = 0; k < m.size(); ++k) m(k) = z(rng);
  return m;
}

Matrix spd(Index d, std::uint64_t seed) {
  const Matrix a = gaussian(d, d, seed);
  return a * a.transpose() / static_cast<double>(d) + Matrix::Identity(d, d);
}

// Every third cell of an n x n matrix, column-major.
std::vector<Cell> cells(Index n) {
  std::vector<Cell> out;
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i)
      if ((i + 2 * j) % 3 == 0) out.push_back({i, j});
  return out;
}

struct Problem {
  explicit Problem(Index n)
      : sinv(spd(n, 1)), dinv(spd(n, 2)), miss(cells(n)), cov(spd(static_cast<Index>(miss.size()), 3)) {}
  Matrix sinv, dinv;
  std::vector<Cell> miss;
  Matrix cov;
};

template <Matrix (*Fn)(const std::vector<Cell>&, const Matrix&, const Matrix&)>
void missing_precision(benchmark::State& state) {
  const Problem pr(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(Fn(pr.miss, pr.sinv, pr.dinv));
}

template <void (*Fn)(const std::vector<Cell>&, const Matrix&, const Matrix&, const Matrix&, Matrix&,
                     Matrix&)>
void corrections(benchmark::State& state) {
  const Problem pr(state.range(0));
  Matrix g, f;
  for (auto _ : state) {
    Fn(pr.miss, pr.cov, pr.sinv, pr.dinv, g, f);
    benchmark::DoNotOptimize(g.data());
    benchmark::DoNotOptimize(f.data());
  }
}

template <Matrix (*Fn)(const Matrix&, const BoolMatrix&, Index)>
void correlation(benchmark::State& state) {
  const Index n = state.range(0);
  const Matrix v = gaussian(n, n / 2, 4);
  BoolMatrix obs = BoolMatrix::Constant(n, n / 2, true);
  for (Index k = 0; k < obs.size(); k += 7) obs(k) = false;
  for (auto _ : state) benchmark::DoNotOptimize(Fn(v, obs, 2));
}

template <Matrix (*Fn)(const Matrix&, const Matrix&)>
void kronecker(benchmark::State& state) {
  const Index n = state.range(0);
  const Matrix a = gaussian(n, n, 5), b = gaussian(n, n, 6);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(a, b));
}

}  // namespace

BENCHMARK(missing_precision<kernels::serial::missing_precision>)->Name("missing_precision/serial")->Arg(12)->Arg(24)->Arg(36);
BENCHMARK(missing_precision<kernels::omp::missing_precision>)->Name("missing_precision/omp")->Arg(12)->Arg(24)->Arg(36);
BENCHMARK(corrections<kernels::serial::assemble_corrections>)->Name("assemble_corrections/serial")->Arg(12)->Arg(24);
BENCHMARK(corrections<kernels::omp::assemble_corrections>)->Name("assemble_corrections/omp")->Arg(12)->Arg(24);
BENCHMARK(correlation<kernels::serial::row_correlation>)->Name("row_correlation/serial")->Arg(100)->Arg(400);
BENCHMARK(correlation<kernels::omp::row_correlation>)->Name("row_correlation/omp")->Arg(100)->Arg(400);
BENCHMARK(kronecker<kernels::serial::kronecker>)->Name("kronecker/serial")->Arg(8)->Arg(16);
BENCHMARK(kronecker<kernels::omp::kronecker>)->Name("kronecker/omp")->Arg(8)->Arg(16);

BENCHMARK_MAIN();
