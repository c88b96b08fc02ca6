#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "problems.hpp"
#include "sephjb/finite_difference.hpp"
#include "sephjb/hjb.hpp"

using namespace sephjb;

namespace {

Matrix kron(const Matrix& slow, const Matrix& fast) {
  Matrix out(slow.rows() * fast.rows(), slow.cols() * fast.cols());
  for (Index i = 0; i < slow.rows(); ++i)
    for (Index j = 0; j < slow.cols(); ++j)
      out.block(i * fast.rows(), j * fast.cols(), fast.rows(), fast.cols()) = slow(i, j) * fast;
  return out;
}

Vector solve_bar(double c) {
  const ProblemConfig cfg = parse_config(problems::bar(c));
  return oracle::expand(solve_first_exit(cfg.problem, cfg.boundaries, cfg.solve).psi);
}

}  // namespace

TEST_CASE("operator matches an explicit Kronecker assembly") {
  const auto doc = nlohmann::json::parse(R"j({
    "grid": [{"name": "a", "points": 12, "lower": -1, "upper": 1},
             {"name": "b", "points": 11, "lower": 0, "upper": 2}],
    "dynamics": [[["1", "x"]], [["sin(x)", "1"]]],
    "control": [[[1], []], [[0.5], [1]]],
    "noise": "control",
    "cost": {"q_terms": [["x^2", "1"]], "R": [[1, 0], [0, 1]], "lambda": 1},
    "setting": "first_exit"
  })j");
  const ProblemConfig cfg = parse_config(doc);
  const Grid& g = cfg.problem.grid;
  const OperatorBuild b = build_operator(cfg.problem);

  const auto D = [&](int dim, int order) { return d_matrix(g, dim, StencilSpec::for_axis(g.axis(dim), order)); };
  const Vector xa = g.axis(0).nodes();
  const Vector xb = g.axis(1).nodes();
  const Matrix Ia = Matrix::Identity(12, 12);
  const Matrix Ib = Matrix::Identity(11, 11);
  Matrix ref = kron(Matrix(xb.asDiagonal()), D(0, 1));
  ref += kron(D(1, 1), Matrix(xa.array().sin().matrix().asDiagonal()));
  // Sigma_t = G G^T = [[1, 0.5], [0.5, 1.25]].
  ref += 0.5 * kron(Ib, D(0, 2));
  ref += 0.5 * kron(D(1, 1), D(0, 1));
  ref += 0.5 * 1.25 * kron(D(1, 2), Ia);
  ref -= kron(Ib, Matrix(xa.array().square().matrix().asDiagonal()));

  const Matrix got = oracle::expand(b.op);
  CHECK((got - ref).norm() <= 1e-11 * ref.norm());
  CHECK(b.ranks.state_cost == 1);
  CHECK(b.ranks.advection == 2);
  // One term per pair of noise entries: both inputs feed the b-b entry.
  CHECK(b.ranks.diffusion == 4);
  CHECK(b.ranks.predicted == 7);
  CHECK(b.ranks.constructed == 7);
}

TEST_CASE("pure diffusion is half the Laplacian") {
  const auto doc = nlohmann::json::parse(R"j({
    "grid": [{"name": "a", "points": 10, "lower": 0, "upper": 1},
             {"name": "b", "points": 12, "lower": 0, "upper": 1, "periodic": true}],
    "dynamics": [[], []],
    "control": [[[1], []], [[], [1]]],
    "noise": "control",
    "cost": {"q_terms": [], "R": [[1, 0], [0, 1]], "lambda": 1},
    "setting": "first_exit"
  })j");
  const ProblemConfig cfg = parse_config(doc);
  const OperatorBuild b = build_operator(cfg.problem);
  CHECK(b.op.rank() == 2);
  const Matrix ref = 0.5 * oracle::expand(laplacian(cfg.problem.grid));
  CHECK((oracle::expand(b.op) - ref).norm() <= 1e-12 * ref.norm());
}

TEST_CASE("rank accounting of the shipped problems") {
  const ProblemConfig pend = problems::shipped("pendulum.json");
  const OperatorBuild p = build_operator(pend.problem);
  CHECK(p.ranks.state_cost == 2);
  CHECK(p.ranks.advection == 3);
  CHECK(p.ranks.diffusion == 1);
  CHECK(p.ranks.constructed == 6);

  const OperatorBuild v = build_operator(problems::shipped("vtol.json").problem);
  CHECK(v.ranks.predicted == v.ranks.constructed);
  CHECK(v.ranks.advection == 4);
  CHECK(v.ranks.diffusion == 9);
  CHECK(v.ranks.constructed == 14);
}

TEST_CASE("constant boundary data without cost gives a constant solution") {
  const Vector psi = solve_bar(0.0);
  CHECK((psi - Vector::Ones(psi.size())).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("one-dimensional first exit against the closed form") {
  const double c = 2.0;
  const ProblemConfig cfg = parse_config(problems::bar(c));
  const Vector x = cfg.problem.grid.axis(0).nodes();
  const Vector psi = solve_bar(c);
  const double k = std::sqrt(2.0 * c);
  for (Index i = 0; i < x.size(); ++i)
    CHECK(psi(i) == doctest::Approx(std::cosh(k * (x(i) - 0.5)) / std::cosh(k * 0.5)).epsilon(1e-7));
}

TEST_CASE("maximum principle and monotonicity in the state cost") {
  Vector prev = solve_bar(0.0);
  for (double c : {0.5, 2.0, 8.0}) {
    const Vector psi = solve_bar(c);
    CHECK(psi.maxCoeff() <= 1.0 + 1e-6);
    CHECK(psi.minCoeff() > 0.0);
    CHECK((psi.array() <= prev.array() + 1e-6).all());
    prev = psi;
  }
}

TEST_CASE("negative state cost is rejected") {
  const ProblemConfig cfg = parse_config(problems::bar(-1.0));
  CHECK_THROWS_AS(solve_first_exit(cfg.problem, cfg.boundaries, cfg.solve), std::invalid_argument);
}

TEST_CASE("matching condition gate") {
  nlohmann::json doc = problems::bar(1.0);
  doc["cost"]["noise_covariance"] = {{1.0}};
  ProblemConfig ok = parse_config(doc);
  const MatchingReport good = check_matching(ok.problem);
  CHECK(good.pass);
  CHECK(good.max_discrepancy <= 1e-10);

  doc["cost"]["R"] = {{1.1}};
  ProblemConfig bad = parse_config(doc);
  const MatchingReport rep = check_matching(bad.problem);
  CHECK_FALSE(rep.pass);
  CHECK(rep.max_discrepancy == doctest::Approx(1.0 - 1.0 / 1.1).epsilon(1e-3));
  CHECK_THROWS_AS(solve_first_exit(bad.problem, bad.boundaries, bad.solve), MatchingError);
  bad.solve.ignore_matching = true;
  CHECK_NOTHROW(solve_first_exit(bad.problem, bad.boundaries, bad.solve));
}

TEST_CASE("heat equation against Crank-Nicolson") {
  const double T = 0.1;
  const ProblemConfig cfg = parse_config(problems::heat(T, 1e-3, 64));
  HorizonOptions ho;
  ho.solve = cfg.solve;
  ho.carry_rank = 2;
  const auto fields = step_finite_horizon(cfg.problem, cfg.boundaries, ho);
  REQUIRE(fields.size() == 101);
  CHECK(fields.front().time == doctest::Approx(T));
  CHECK(fields.back().time == doctest::Approx(0.0).epsilon(1e-12));

  const Grid& g = cfg.problem.grid;
  const Matrix A = 0.5 * d_matrix(g, 0, StencilSpec::for_axis(g.axis(0), 2));
  const Index n = A.rows();
  const Vector x = g.axis(0).nodes();
  Vector ref = 2.0 + x.array().sin();
  const int steps = 1000;
  const double dt = T / steps;
  const Eigen::PartialPivLU<Matrix> lu(Matrix::Identity(n, n) - 0.5 * dt * A);
  const Matrix rhs_op = Matrix::Identity(n, n) + 0.5 * dt * A;
  for (int s = 0; s < steps; ++s) ref = lu.solve(rhs_op * ref);

  const Vector got = oracle::expand(fields.back().psi);
  CHECK((got - ref).norm() / ref.norm() <= 1e-3);
  const Vector exact = 2.0 + std::exp(-0.5 * T) * x.array().sin();
  CHECK((got - exact).norm() / exact.norm() <= 1e-3);
}

TEST_CASE("tiny diffusion leaves the terminal data unchanged") {
  nlohmann::json doc = problems::heat(0.05, 0.01, 32);
  doc["cost"]["R"] = {{1e8}};
  const ProblemConfig cfg = parse_config(doc);
  HorizonOptions ho;
  ho.solve = cfg.solve;
  const auto fields = step_finite_horizon(cfg.problem, cfg.boundaries, ho);
  const Vector first = oracle::expand(fields.front().psi);
  for (const auto& f : fields) CHECK((oracle::expand(f.psi) - first).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("terminal desirability") {
  nlohmann::json doc = problems::heat(0.1, 0.01, 16);
  doc["setting"]["finite_horizon"].erase("terminal_psi");
  doc["setting"]["finite_horizon"]["terminal"] = {{"x^2"}, 3.0};
  const ProblemConfig cfg = parse_config(doc);
  const Vector psi = oracle::expand(terminal_desirability(cfg.problem));
  const Vector x = cfg.problem.grid.axis(0).nodes();
  for (Index i = 0; i < x.size(); ++i) CHECK(psi(i) == doctest::Approx(std::exp(-(x(i) * x(i) + 3.0))));
}

TEST_CASE("value function") {
  const Grid g({Axis{"x", 41, -2.0, 2.0, false}});
  const Vector x = g.axis(0).nodes();
  DesirabilityField f;
  f.lambda = 1.0;
  f.psi = SepVector::rank_one(1.0, {Vector((-x.array().square()).exp())});
  f.epsilon = 1e-12 * max_grid_value(f.psi);
  const ValueFunction V = desirability_to_value(f, g);
  for (double p : {-1.5, -0.3, 0.0, 0.45, 1.9}) CHECK(V(std::span<const double>(&p, 1)) == doctest::Approx(p * p).epsilon(0.01));
  const double node = x(10);
  CHECK(V(std::span<const double>(&node, 1)) == doctest::Approx(node * node).epsilon(1e-12));

  DesirabilityField one;
  one.lambda = 2.0;
  one.psi = SepVector::rank_one(1.0, {Vector::Ones(41)});
  one.epsilon = 1e-12;
  const ValueFunction V1(one, g);
  const double p = 0.7;
  CHECK(std::abs(V1(std::span<const double>(&p, 1))) < 1e-14);
  CHECK(max_grid_value(one.psi) == doctest::Approx(1.0));
}
