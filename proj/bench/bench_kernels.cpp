// Serial reference vs OpenMP kernels. Run with SEPHJB_THREADS to pick the
// thread count of the parallel variants.

#include <benchmark/benchmark.h>

#include <random>

#include "sephjb/als.hpp"
#include "sephjb/kernels.hpp"

using namespace sephjb;
using kernels::Exec;

namespace {

Matrix random_matrix(Index r, Index c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Matrix banded(Index n, int half, std::uint64_t seed) {
  Matrix m = random_matrix(n, n, seed);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (std::abs(i - j) > half) m(i, j) = 0.0;
  return m;
}

struct Data {
  std::vector<Matrix> ops;
  std::vector<const Matrix*> ptrs;
  Matrix F;
  explicit Data(Index m, Index ra = 12, Index rf = 16) {
    for (Index a = 0; a < ra; ++a) ops.push_back(a % 3 == 0 ? Matrix(Matrix::Identity(m, m)) : banded(m, 4, a));
    for (const auto& o : ops) ptrs.push_back(&o);
    F = random_matrix(m, rf, 99);
  }
};

Exec exec_of(const benchmark::State& s) { return s.range(1) ? Exec::parallel : Exec::serial; }

void BM_apply_factors(benchmark::State& s) {
  const Data d(s.range(0));
  for (auto _ : s) benchmark::DoNotOptimize(kernels::apply_factors(d.ptrs, d.F, exec_of(s)));
}

void BM_gram(benchmark::State& s) {
  const Matrix U = random_matrix(s.range(0), 200, 5);
  for (auto _ : s) benchmark::DoNotOptimize(kernels::gram(U, exec_of(s)));
}

void BM_operator_products(benchmark::State& s) {
  const Data d(s.range(0));
  for (auto _ : s) benchmark::DoNotOptimize(kernels::operator_products(d.ptrs, exec_of(s)));
}

void BM_normal_matrix(benchmark::State& s) {
  const Data d(s.range(0));
  const auto P = kernels::operator_products(d.ptrs, Exec::serial);
  const Index rf = d.F.cols();
  const Matrix coef = random_matrix(d.ops.size() * rf, d.ops.size() * rf, 7);
  const std::vector<double> sa(d.ops.size(), 0.5);
  for (auto _ : s) benchmark::DoNotOptimize(kernels::normal_matrix(P, sa, coef, rf, exec_of(s)));
}

void BM_als_solve(benchmark::State& s) {
  const Index m = s.range(0);
  const Shape shape{m, m, m, m};
  std::vector<std::vector<Matrix>> terms(3);
  for (Index a = 0; a < 3; ++a)
    for (int i = 0; i < 4; ++i) terms[a].push_back(a == 0 ? Matrix(Matrix::Identity(m, m)) : banded(m, 4, 10 * a + i));
  const SepOperator A(shape, {2.0, 0.1, 0.1}, terms);
  const SepVector G = random_rank_one(shape, 3);
  AlsOptions o;
  o.tolerance = 1e-12;
  o.max_rank = 8;
  o.initial_rank = 8;
  o.max_sweeps = 5;
  o.exec = exec_of(s);
  for (auto _ : s) benchmark::DoNotOptimize(als_solve(A, G, o));
}

void args(benchmark::internal::Benchmark* b) {
  for (long m : {64, 128, 256})
    for (long p : {0, 1}) b->Args({m, p});
  b->ArgNames({"M", "parallel"});
}

}  // namespace

BENCHMARK(BM_apply_factors)->Apply(args);
BENCHMARK(BM_gram)->Apply(args);
BENCHMARK(BM_operator_products)->Apply(args);
BENCHMARK(BM_normal_matrix)->Apply(args);
BENCHMARK(BM_als_solve)->Args({32, 0})->Args({32, 1})->Args({64, 0})->Args({64, 1})->ArgNames({"M", "parallel"});

int main(int argc, char** argv) {
  kernels::configure_threads_from_env();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
