#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sephjb/sep_tensor.hpp"

using namespace sephjb;

namespace {

double rel(const Vector& a, const Vector& b) {
  const double n = std::max(b.norm(), 1e-300);
  return (a - b).norm() / n;
}

}  // namespace

TEST_CASE("construction normalizes factors and moves signs into dimension 0") {
  std::vector<Matrix> f = {Matrix::Constant(3, 2, 2.0), Matrix::Constant(4, 2, -1.0)};
  f[0](0, 1) = 0.5;
  const SepVector v({-1.5, 2.0}, f);
  for (Index l = 0; l < v.rank(); ++l) {
    CHECK(v.scale(l) >= 0.0);
    for (int i = 0; i < v.dims(); ++i) CHECK(v.factor(i).col(l).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  std::mt19937_64 rng(7);
  const SepVector r = oracle::random_vector({3, 4, 5}, 3, rng);
  CHECK(r.rank() == 3);
  for (Index l = 0; l < 3; ++l) CHECK(r.scale(l) >= 0.0);
}

TEST_CASE("expansion of a constructed vector matches the factor data") {
  std::vector<Matrix> f = {Matrix::Random(3, 2), Matrix::Random(4, 2)};
  const std::vector<double> s = {0.7, -1.3};
  const SepVector v(s, f);
  Vector ref = Vector::Zero(12);
  for (Index b = 0; b < 4; ++b)
    for (Index a = 0; a < 3; ++a)
      for (int l = 0; l < 2; ++l) ref(a + 3 * b) += s[l] * f[0](a, l) * f[1](b, l);
  CHECK(rel(to_dense(v), ref) < 1e-14);
}

TEST_CASE("rank zero is the exact zero tensor") {
  const SepVector z(Shape{3, 4});
  CHECK(z.rank() == 0);
  CHECK(norm(z) == 0.0);
  CHECK(to_dense(z).isZero(0.0));
  std::mt19937_64 rng(1);
  const SepVector a = oracle::random_vector({3, 4}, 2, rng);
  const SepVector s = add(a, z);
  CHECK(s.rank() == a.rank());
  CHECK(rel(to_dense(s), to_dense(a)) == 0.0);
  const SepOperator Z(Shape{3, 4});
  CHECK(apply(Z, a).rank() == 0);
}

TEST_CASE("add concatenates terms") {
  std::mt19937_64 rng(2);
  const SepVector a = oracle::random_vector({4, 4, 4}, 2, rng);
  const SepVector b = oracle::random_vector({4, 4, 4}, 3, rng);
  const SepVector c = add(a, b);
  CHECK(c.rank() == 5);
  CHECK(rel(oracle::expand(c), oracle::expand(a) + oracle::expand(b)) < 1e-13);
}

TEST_CASE("inner and norm") {
  const SepVector e = SepVector::rank_one(3.0, {Vector::Unit(4, 1), Vector::Ones(5) / std::sqrt(5.0)});
  CHECK(inner(e, e) == doctest::Approx(9.0).epsilon(1e-14));
  CHECK(norm(e) == doctest::Approx(3.0).epsilon(1e-14));
  // Unnormalized factors move their norms into the scale.
  CHECK(norm(SepVector::rank_one(1.0, {Vector::Ones(4), Vector::Ones(5)})) == doctest::Approx(std::sqrt(20.0)));
  const SepVector o = SepVector::rank_one(2.0, {Vector::Unit(4, 2), Vector::Ones(5)});
  CHECK(inner(e, o) == 0.0);
  std::mt19937_64 rng(3);
  const SepVector a = oracle::random_vector({5, 5, 5}, 3, rng);
  const SepVector b = oracle::random_vector({5, 5, 5}, 3, rng);
  const double ref = oracle::expand(a).dot(oracle::expand(b));
  CHECK(std::abs(inner(a, b) - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
}

TEST_CASE("operator application, composition and identity") {
  std::mt19937_64 rng(4);
  const Shape shape{3, 4, 2};
  const SepOperator A = oracle::random_operator(shape, 2, rng);
  const SepOperator B = oracle::random_operator(shape, 3, rng);
  const SepVector f = oracle::random_vector(shape, 2, rng);
  const SepVector Af = apply(A, f);
  CHECK(Af.rank() == 4);
  CHECK(rel(oracle::expand(Af), oracle::expand(A) * oracle::expand(f)) < 1e-12);
  const SepOperator AB = compose(A, B);
  CHECK(AB.rank() == 6);
  const Matrix dAB = oracle::expand(AB);
  const Matrix ref = oracle::expand(A) * oracle::expand(B);
  CHECK((dAB - ref).norm() <= 1e-12 * ref.norm());
  const SepVector If = apply(SepOperator::identity(shape), f);
  CHECK(rel(to_dense(If), to_dense(f)) < 1e-15);
  CHECK((to_dense(add(A, B)) - oracle::expand(A) - oracle::expand(B)).norm() < 1e-12 * ref.norm());
  CHECK((to_dense(scale(A, -2.0)) + 2.0 * oracle::expand(A)).norm() < 1e-13 * oracle::expand(A).norm());
}

TEST_CASE("mode products reproduce operator application") {
  std::mt19937_64 rng(5);
  const Shape shape{3, 5, 4};
  const SepOperator A = oracle::random_operator(shape, 3, rng);
  const SepVector f = oracle::random_vector(shape, 2, rng);
  const Vector ref = oracle::expand(A) * oracle::expand(f);
  CHECK(rel(apply_dense(A, oracle::expand(f)), ref) < 1e-12);
}

TEST_CASE("vectorize round trip") {
  std::mt19937_64 rng(6);
  const SepOperator A = oracle::random_operator({3, 4}, 3, rng);
  const SepVector v = vectorize(A);
  CHECK(v.shape() == Shape{9, 16});
  const SepOperator B = unvectorize(v, A.shape());
  CHECK((to_dense(B) - oracle::expand(A)).norm() < 1e-13 * oracle::expand(A).norm());
}

TEST_CASE("shape and cap errors") {
  const SepVector a = SepVector::rank_one(1.0, {Vector::Ones(3), Vector::Ones(4)});
  const SepVector b = SepVector::rank_one(1.0, {Vector::Ones(4), Vector::Ones(3)});
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(inner(a, b), ShapeError);
  CHECK_THROWS_AS(apply(SepOperator::identity({4, 3}), a), ShapeError);
  CHECK_THROWS_AS(to_dense(a, DenseCap{5}), DenseCapError);
  CHECK_THROWS_AS(to_dense(SepOperator::identity({3, 4}), DenseCap{100}), DenseCapError);
  CHECK_THROWS_AS(SepVector({1.0}, {Matrix::Ones(3, 2)}), ShapeError);
}

TEST_CASE("random rank-one tensors are reproducible") {
  const SepVector a = random_rank_one({5, 6}, 42);
  const SepVector b = random_rank_one({5, 6}, 42);
  const SepVector c = random_rank_one({5, 6}, 43);
  CHECK(to_dense(a) == to_dense(b));
  CHECK(to_dense(a) != to_dense(c));
  CHECK(norm(a) == doctest::Approx(1.0));
}
