#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "sephjb/als.hpp"

using namespace sephjb;

namespace {

// Diagonally dominant operator with rank-2 coupling.
SepOperator test_operator(const Shape& shape, std::mt19937_64& rng) {
  SepOperator A = scale(SepOperator::identity(shape), 2.0);
  return add(A, scale(oracle::random_operator(shape, 2, rng), 0.2));
}

}  // namespace

TEST_CASE("manufactured rank-one solution is recovered") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    std::mt19937_64 rng(seed);
    const Shape shape{10, 11, 12};
    const SepOperator A = test_operator(shape, rng);
    const SepVector x = random_rank_one(shape, seed + 100, 3.0);
    const SepVector G = apply(A, x);
    AlsOptions o;
    o.tolerance = 1e-12;
    o.max_rank = 3;
    o.max_sweeps = 300;
    o.seed = seed;
    o.regularization = 0.0;
    const auto r = als_solve(A, G, o);
    const Vector xd = oracle::expand(x);
    CHECK((oracle::expand(r.solution) - xd).norm() / xd.norm() < 1e-6);
  }
}

TEST_CASE("objective never increases across block updates") {
  std::mt19937_64 rng(21);
  const Shape shape{8, 9, 10};
  const SepOperator A = test_operator(shape, rng);
  const SepVector G = oracle::random_vector(shape, 4, rng);
  AlsOptions o;
  o.tolerance = 1e-10;
  o.max_rank = 6;
  o.max_sweeps = 60;
  o.check_monotone = true;
  const auto r = als_solve(A, G, o);
  CHECK(r.report.block_updates > 0);
  CHECK(r.report.monotonicity_violations == 0);
  const auto q = als_reduce(G, o);
  CHECK(q.report.monotonicity_violations == 0);
}

TEST_CASE("report bookkeeping and termination") {
  std::mt19937_64 rng(22);
  const Shape shape{8, 8};
  const SepVector G = oracle::random_vector(shape, 3, rng);
  AlsOptions o;
  o.tolerance = 1e-9;
  o.max_rank = 8;
  o.max_sweeps = 400;
  o.regularization = 0.0;
  int calls = 0;
  o.on_sweep = [&](const SweepInfo&) { ++calls; };
  const auto r = als_reduce(G, o);
  CHECK(r.report.termination == Termination::converged);
  CHECK(r.report.final_residual() <= 1e-9);
  CHECK(calls == static_cast<int>(r.report.residuals.size()));
  CHECK(r.report.ranks.size() == r.report.residuals.size());
  CHECK(r.solution.rank() <= 8);

  o.max_rank = 1;
  o.max_sweeps = 50;
  CHECK(als_reduce(G, o).report.termination == Termination::rank_capped);
  o.max_rank = 8;
  o.max_sweeps = 2;
  o.stagnation = 1e-12;
  CHECK(als_reduce(G, o).report.termination == Termination::sweep_capped);
}

TEST_CASE("zero right-hand side gives the zero solution") {
  const Shape shape{6, 6};
  AlsOptions o;
  const auto r = als_solve(SepOperator::identity(shape), SepVector(shape), o);
  CHECK(r.report.absolute_residual);
  CHECK(norm(r.solution) == 0.0);
}

TEST_CASE("reduction keeps exact low-rank input") {
  std::mt19937_64 rng(23);
  const SepVector a = oracle::random_vector({7, 8, 9}, 2, rng);
  AlsOptions o;
  o.tolerance = 1e-9;
  o.max_rank = 4;
  o.max_sweeps = 500;
  o.regularization = 0.0;
  const auto r = als_reduce(add(a, a), o, &a);
  CHECK(r.solution.rank() <= 2);
  CHECK((oracle::expand(r.solution) - 2.0 * oracle::expand(a)).norm() <= 1e-9 * 2.0 * norm(a));
}

TEST_CASE("operator compression") {
  const Shape shape{6, 7};
  AlsOptions o;
  o.tolerance = 1e-12;
  o.max_rank = 4;
  o.regularization = 0.0;
  const auto id = compress_operator(SepOperator::identity(shape), o);
  CHECK(id.op.rank() == 1);
  CHECK((to_dense(id.op) - Matrix::Identity(42, 42)).norm() < 1e-11);

  std::mt19937_64 rng(24);
  const SepOperator B = oracle::random_operator(shape, 2, rng);
  const auto dup = compress_operator(add(B, B), o);
  CHECK(dup.op.rank() <= 2);
  const Matrix ref = 2.0 * oracle::expand(B);
  CHECK((to_dense(dup.op) - ref).norm() <= 1e-11 * ref.norm());
}

TEST_CASE("residual matches a dense computation") {
  std::mt19937_64 rng(25);
  const Shape shape{5, 6, 4};
  const SepOperator A = oracle::random_operator(shape, 2, rng);
  const SepVector F = oracle::random_vector(shape, 2, rng);
  const SepVector G = oracle::random_vector(shape, 3, rng);
  const Vector g = oracle::expand(G);
  const double ref = (oracle::expand(A) * oracle::expand(F) - g).norm() / g.norm();
  const auto r = residual(A, F, G);
  CHECK_FALSE(r.absolute);
  CHECK(r.value == doctest::Approx(ref).epsilon(1e-10));
  // Tiny residuals fall back to dense products.
  const auto exact = residual(SepOperator::identity(shape), G, G);
  CHECK(exact.value < 1e-14);
}

TEST_CASE("option validation") {
  AlsOptions o;
  o.max_rank = 0;
  CHECK_THROWS_AS(o.validate(), std::invalid_argument);
  o = AlsOptions{};
  o.tolerance = -1.0;
  CHECK_THROWS_AS(o.validate(), std::invalid_argument);
  o = AlsOptions{};
  o.initial_rank = 30;
  o.max_rank = 5;
  CHECK_THROWS_AS(o.validate(), std::invalid_argument);
}

TEST_CASE("rank-one reduction is close to the SVD optimum in two dimensions") {
  std::mt19937_64 rng(26);
  const SepVector G = oracle::random_vector({15, 12}, 8, rng);
  const Vector g = oracle::expand(G);
  const Matrix mat = Eigen::Map<const Matrix>(g.data(), 15, 12);
  const Eigen::JacobiSVD<Matrix> svd(mat);
  const Vector sv = svd.singularValues();
  const double best = std::sqrt(sv.tail(sv.size() - 1).squaredNorm()) / sv.norm();
  AlsOptions o;
  o.tolerance = 1e-12;
  o.max_rank = 1;
  o.max_sweeps = 300;
  o.stagnation = 1e-9;
  o.regularization = 0.0;
  const auto r = als_reduce(G, o);
  CHECK(r.report.final_residual() <= 1.05 * best);
}

TEST_CASE("identity operator reduces to plain approximation") {
  std::mt19937_64 rng(27);
  const Shape shape{9, 8, 7};
  const SepVector G = oracle::random_vector(shape, 3, rng);
  AlsOptions o;
  o.tolerance = 1e-6;
  o.max_rank = 4;
  o.max_sweeps = 40;
  const auto a = als_reduce(G, o);
  const auto b = als_solve(SepOperator::identity(shape), G, o);
  REQUIRE(a.solution.rank() == b.solution.rank());
  const Vector da = oracle::expand(a.solution);
  CHECK((da - oracle::expand(b.solution)).norm() <= 1e-10 * da.norm());
}

TEST_CASE("residual of the zero iterate is one") {
  std::mt19937_64 rng(28);
  const Shape shape{5, 5};
  const SepVector G = oracle::random_vector(shape, 2, rng);
  CHECK(residual(SepOperator::identity(shape), SepVector(shape), G).value == doctest::Approx(1.0));
}
