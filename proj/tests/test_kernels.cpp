#include <doctest.h>

#include <omp.h>

#include <random>

#include "oracles.hpp"
#include "sephjb/als.hpp"
#include "sephjb/kernels.hpp"

using namespace sephjb;
using kernels::Exec;

namespace {

Matrix random_matrix(Index r, Index c, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

Matrix banded(Index n, int half, std::mt19937_64& rng) {
  Matrix m = random_matrix(n, n, rng);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      if (std::abs(i - j) > half) m(i, j) = 0.0;
  return m;
}

struct ThreadScope {
  int saved = omp_get_max_threads();
  explicit ThreadScope(int n) { omp_set_num_threads(n); }
  ~ThreadScope() { omp_set_num_threads(saved); }
};

}  // namespace

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
  std::mt19937_64 rng(11);
  for (int threads : {1, 3, 4}) {
    ThreadScope scope(threads);
    std::vector<Matrix> ops = {banded(37, 4, rng), random_matrix(37, 37, rng), banded(37, 1, rng)};
    std::vector<const Matrix*> ptrs;
    for (const auto& m : ops) ptrs.push_back(&m);
    const Matrix F = random_matrix(37, 5, rng);

    CHECK(kernels::apply_factors(ptrs, F, Exec::serial) == kernels::apply_factors(ptrs, F, Exec::parallel));
    CHECK(kernels::gram(F, Exec::serial) == kernels::gram(F, Exec::parallel));
    const Matrix G = random_matrix(37, 3, rng);
    CHECK(kernels::cross_gram(F, G, Exec::serial) == kernels::cross_gram(F, G, Exec::parallel));

    const auto Ps = kernels::operator_products(ptrs, Exec::serial);
    const auto Pp = kernels::operator_products(ptrs, Exec::parallel);
    for (Index a = 0; a < 3; ++a)
      for (Index b = 0; b < 3; ++b) CHECK(Ps.at(a, b) == Pp.at(a, b));

    const std::vector<double> s = {0.5, -1.25, 2.0};
    const Index n_terms = 4;
    const Matrix coef = random_matrix(3 * n_terms, 3 * n_terms, rng);
    CHECK(kernels::normal_matrix(Ps, s, coef, n_terms, Exec::serial) ==
          kernels::normal_matrix(Pp, s, coef, n_terms, Exec::parallel));
  }
}

TEST_CASE("operator products against direct multiplication") {
  std::mt19937_64 rng(12);
  std::vector<Matrix> ops = {banded(20, 2, rng), banded(20, 3, rng)};
  std::vector<const Matrix*> ptrs = {&ops[0], &ops[1]};
  const auto P = kernels::operator_products(ptrs);
  for (Index a = 0; a < 2; ++a)
    for (Index b = 0; b < 2; ++b) {
      const Matrix ref = ops[b].transpose() * ops[a];
      CHECK((P.at(a, b) - ref).norm() <= 1e-13 * ref.norm());
    }
  const Matrix F = random_matrix(20, 3, rng);
  const Matrix AF = kernels::apply_factors(ptrs, F);
  CHECK(AF.cols() == 6);
  CHECK((AF.col(1 * 3 + 2) - ops[1] * F.col(2)).norm() < 1e-13);
}

TEST_CASE("column profile brackets the nonzeros") {
  Matrix m = Matrix::Zero(6, 3);
  m(2, 0) = 1.0;
  m(4, 0) = 1.0;
  m(0, 2) = 1.0;
  const auto p = kernels::ColumnProfile::of(m);
  CHECK(p.first[0] == 2);
  CHECK(p.last[0] == 4);
  CHECK(p.first[1] > p.last[1]);
  CHECK(p.first[2] == 0);
  CHECK(p.last[2] == 0);
}

TEST_CASE("hadamard_except skips one factor") {
  std::vector<Matrix> mats = {Matrix::Constant(2, 2, 2.0), Matrix::Constant(2, 2, 3.0),
                              Matrix::Constant(2, 2, 5.0)};
  CHECK(kernels::hadamard_except(mats, 1)(0, 1) == 10.0);
  CHECK(kernels::hadamard_except(mats, 0)(1, 1) == 15.0);
}

TEST_CASE("serial and parallel ALS runs agree bitwise") {
  ThreadScope scope(4);
  std::mt19937_64 rng(13);
  const Shape shape{12, 12, 12};
  SepOperator A = add(SepOperator::identity(shape), scale(oracle::random_operator(shape, 2, rng), 0.1));
  const SepVector G = oracle::random_vector(shape, 2, rng);
  AlsOptions o;
  o.tolerance = 1e-8;
  o.max_rank = 4;
  o.max_sweeps = 15;
  o.exec = Exec::serial;
  const auto s = als_solve(A, G, o);
  o.exec = Exec::parallel;
  const auto p = als_solve(A, G, o);
  CHECK(s.report.residuals == p.report.residuals);
  CHECK(to_dense(s.solution) == to_dense(p.solution));
}
