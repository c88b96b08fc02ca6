#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "sephjb/finite_difference.hpp"

using namespace sephjb;

namespace {

Grid line(Index m, double lo, double hi, bool periodic) {
  return Grid({Axis{"x", m, lo, hi, periodic}});
}

double periodic_error(Index m, int accuracy) {
  const double pi = std::numbers::pi;
  const Grid g = line(m, -pi, pi, true);
  const Matrix D = d_matrix(g, 0, StencilSpec::for_axis(g.axis(0), 1, accuracy));
  const Vector x = g.axis(0).nodes();
  const Vector err = D * x.array().sin().matrix() - x.array().cos().matrix();
  return err.cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("stencil weights agree with Fornberg") {
  for (int n : {3, 5, 7, 9}) {
    std::vector<int> offs;
    std::vector<double> xs;
    for (int j = -(n / 2); j <= n / 2; ++j) {
      offs.push_back(j);
      xs.push_back(j);
    }
    for (int m : {1, 2}) {
      const auto w = stencil_weights(offs, m);
      const auto ref = oracle::fornberg(0.0, xs, m);
      for (int j = 0; j < n; ++j) CHECK(w[j] == doctest::Approx(ref[j]).epsilon(1e-11));
    }
  }
  // One-sided window used near a wall.
  const std::vector<int> offs = {-1, 0, 1, 2, 3, 4, 5, 6, 7};
  const std::vector<double> xs(offs.begin(), offs.end());
  const auto w = stencil_weights(offs, 1);
  const auto ref = oracle::fornberg(0.0, xs, 1);
  for (std::size_t j = 0; j < w.size(); ++j) CHECK(w[j] == doctest::Approx(ref[j]).epsilon(1e-10));
}

TEST_CASE("eighth-order central weights") {
  const std::vector<int> offs = {-4, -3, -2, -1, 0, 1, 2, 3, 4};
  const auto w = stencil_weights(offs, 1);
  CHECK(w[5] == doctest::Approx(4.0 / 5.0).epsilon(1e-12));
  CHECK(w[6] == doctest::Approx(-1.0 / 5.0).epsilon(1e-12));
  CHECK(w[7] == doctest::Approx(4.0 / 105.0).epsilon(1e-12));
  CHECK(w[8] == doctest::Approx(-1.0 / 280.0).epsilon(1e-12));
  CHECK(w[4] == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("derivative matrices are exact on low-degree polynomials") {
  const Grid g = line(30, -1.0, 2.0, false);
  const Vector x = g.axis(0).nodes();
  for (int acc : {2, 4, 6, 8}) {
    const Matrix D1 = d_matrix(g, 0, StencilSpec::for_axis(g.axis(0), 1, acc));
    const Matrix D2 = d_matrix(g, 0, StencilSpec::for_axis(g.axis(0), 2, acc));
    const Vector p = x.array().pow(acc);
    const Vector dp = acc * x.array().pow(acc - 1);
    CHECK((D1 * p - dp).cwiseAbs().maxCoeff() < 1e-8 * (1.0 + dp.cwiseAbs().maxCoeff()));
    CHECK((D2 * x.array().pow(acc - 1).matrix() - ((acc - 1) * (acc - 2) * x.array().pow(acc - 3)).matrix())
              .cwiseAbs()
              .maxCoeff() < 1e-6);
  }
}

TEST_CASE("periodic first derivative converges at eighth order") {
  std::vector<double> e;
  for (Index m : {12, 24, 48, 96}) e.push_back(periodic_error(m, 8));
  for (std::size_t i = 0; i + 1 < e.size(); ++i) {
    const double slope = std::log2(e[i] / e[i + 1]);
    CHECK(slope >= 7.5);
  }
}

TEST_CASE("periodic rows wrap and sum to zero") {
  const Grid g = line(16, 0.0, 1.0, true);
  const Matrix D = d_matrix(g, 0, StencilSpec::for_axis(g.axis(0), 2, 8));
  CHECK((D.rowwise().sum()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(D(0, 15) != 0.0);
  CHECK(D(0, 4) != 0.0);
  CHECK(D(0, 5) == 0.0);
}

TEST_CASE("operator builders") {
  const Grid g({Axis{"a", 12, 0.0, 1.0, false}, Axis{"b", 14, 0.0, 2.0, true}});
  const SepOperator G1 = gradient_op(g, 1);
  CHECK(G1.rank() == 1);
  CHECK(G1.factor(0, 0).isIdentity());
  CHECK(laplacian(g).rank() == 2);
  const SepOperator mixed = second_op(g, 0, 1);
  const Matrix D0 = d_matrix(g, 0, StencilSpec::for_axis(g.axis(0), 1));
  CHECK((mixed.factor(0, 0) - D0).norm() == 0.0);
  // d/da of a is 1 everywhere, walls included.
  const Vector x0 = g.axis(0).nodes();
  const SepVector f = SepVector::rank_one(1.0, {x0, Vector::Ones(14)});
  const Vector d = to_dense(apply(gradient_op(g, 0), f));
  CHECK((d - Vector::Ones(12 * 14)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK_THROWS_AS(d_matrix(g, 0, StencilSpec{1, 8, StencilSpec::Boundary::periodic_wrap}), std::invalid_argument);
  CHECK_THROWS_AS(d_matrix(line(12, 0, 1, false), 0, StencilSpec{1, 10, StencilSpec::Boundary::one_sided}),
                  std::invalid_argument);
}
