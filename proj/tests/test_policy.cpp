#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "problems.hpp"
#include "sephjb/policy.hpp"

using namespace sephjb;

namespace {

// 1D problem on [-2, 2] with G = 1, R = 1, lambda = 1.
ProblemConfig line_problem(const char* drift, bool controlled) {
  nlohmann::json doc = problems::bar(0.0, 81);
  doc["grid"][0]["lower"] = -2;
  doc["grid"][0]["upper"] = 2;
  doc["dynamics"] = nlohmann::json::array({nlohmann::json::array()});
  if (drift) doc["dynamics"][0].push_back(std::stod(drift));
  if (!controlled) {
    doc["control"] = nlohmann::json::parse("[[[]]]");
    doc["noise"] = nlohmann::json::parse("[[[]]]");
  }
  return parse_config(doc);
}

DesirabilityField field_from(const Vector& values) {
  DesirabilityField f;
  f.lambda = 1.0;
  f.psi = SepVector::rank_one(1.0, {values});
  f.epsilon = 1e-12 * max_grid_value(f.psi);
  return f;
}

}  // namespace

TEST_CASE("control from a Gaussian desirability") {
  const ProblemConfig cfg = line_problem(nullptr, true);
  const Grid& g = cfg.problem.grid;
  const Vector x = g.axis(0).nodes();
  const DesirabilityField f = field_from((-x.array().square()).exp());
  const PolicyField pf(cfg.problem, f);
  for (double p : {-0.5, -0.1, 0.0, 0.2, 0.5}) {
    const Vector u = optimal_control(pf, std::span<const double>(&p, 1));
    CHECK(std::abs(u(0) + 2.0 * p) <= 1e-3);
  }
  const double out = 2.5;
  CHECK_THROWS_AS(optimal_control(pf, std::span<const double>(&out, 1)), DomainError);

  const DesirabilityField flat = field_from(Vector::Constant(x.size(), 0.3));
  const PolicyField pflat(cfg.problem, flat);
  const double p = 0.37;
  CHECK(std::abs(optimal_control(pflat, std::span<const double>(&p, 1))(0)) < 1e-10);
}

TEST_CASE("deterministic motion") {
  const ProblemConfig still = line_problem(nullptr, false);
  const Vector x = still.problem.grid.axis(0).nodes();
  const DesirabilityField f = field_from(Vector::Ones(x.size()));
  SimulationOptions o;
  o.dt = 0.01;
  o.t_max = 0.5;
  const double x0 = 0.3;
  const Trajectory t0 = simulate(PolicyField(still.problem, f), std::span<const double>(&x0, 1), o);
  CHECK(t0.reason == ExitReason::horizon);
  for (const auto& pt : t0.points) CHECK(pt.x(0) == doctest::Approx(0.3).epsilon(1e-14));

  const ProblemConfig moving = line_problem("0.5", false);
  const Trajectory t1 = simulate(PolicyField(moving.problem, f), std::span<const double>(&x0, 1), o);
  CHECK(t1.points.size() == 51);
  for (const auto& pt : t1.points) CHECK(pt.x(0) == doctest::Approx(0.3 + 0.5 * pt.t).epsilon(1e-12));

  o.t_max = 10.0;
  const Trajectory t2 = simulate(PolicyField(moving.problem, f), std::span<const double>(&x0, 1), o);
  CHECK(t2.reason == ExitReason::domain_exit);
  CHECK(t2.points.back().t == doctest::Approx((2.0 - 0.3) / 0.5).epsilon(0.01));

  o.goals.push_back(RegionCondition::from_box(moving.problem.grid, {{0.9, 1.1}}, SepTerm::constant(1, 1.0)));
  const Trajectory t3 = simulate(PolicyField(moving.problem, f), std::span<const double>(&x0, 1), o);
  CHECK(t3.reason == ExitReason::goal);
  CHECK(o.goals[0].contains(std::span<const double>(t3.points.back().x.data(), 1), moving.problem.grid));
  CHECK(t3.points.back().u.isZero());

  o.dt = 0.0;
  CHECK_THROWS_AS(simulate(PolicyField(moving.problem, f), std::span<const double>(&x0, 1), o),
                  std::invalid_argument);
  o.dt = 0.01;
  const double bad = 3.0;
  CHECK_THROWS_AS(simulate(PolicyField(moving.problem, f), std::span<const double>(&bad, 1), o), DomainError);
}

TEST_CASE("replay determinism") {
  const ProblemConfig cfg = line_problem(nullptr, true);
  const Vector x = cfg.problem.grid.axis(0).nodes();
  const DesirabilityField f = field_from((-x.array().square()).exp());
  const PolicyField pf(cfg.problem, f);
  SimulationOptions o;
  o.dt = 1e-3;
  o.t_max = 1.0;
  o.seed = 9;
  const double x0 = 1.0;
  const Trajectory a = simulate(pf, std::span<const double>(&x0, 1), o);
  const Trajectory b = simulate(pf, std::span<const double>(&x0, 1), o);
  REQUIRE(a.points.size() == b.points.size());
  for (std::size_t i = 0; i < a.points.size(); ++i) {
    CHECK(a.points[i].x == b.points[i].x);
    CHECK(a.points[i].xi == b.points[i].xi);
  }
  o.seed = 10;
  const Trajectory c = simulate(pf, std::span<const double>(&x0, 1), o);
  CHECK(c.points[1].x != a.points[1].x);
  // The feedback pulls the state toward the origin.
  CHECK(std::abs(a.points.back().x(0)) < 1.0);
}

TEST_CASE("slices") {
  const Grid g({Axis{"a", 10, 0.0, 1.0, false}, Axis{"b", 12, -1.0, 1.0, true},
                Axis{"c", 11, 0.0, 2.0, false}});
  std::mt19937_64 rng(5);
  const SepVector psi = oracle::random_vector(g.shape(), 3, rng);
  const double fixed[3] = {0.0, 0.0, 1.03};
  const Slice s = export_slice(psi, g, fixed, 0, 1);
  CHECK(s.values.rows() == 10);
  CHECK(s.values.cols() == 12);
  CHECK(s.fixed_nodes[2] == 5);
  for (Index i = 0; i < 10; ++i)
    for (Index j = 0; j < 12; ++j) {
      const double x[3] = {g.axis(0).node(i), g.axis(1).node(j), g.axis(2).node(5)};
      CHECK(s.values(i, j) == doctest::Approx(evaluate(psi, x, g)).epsilon(1e-12));
    }

  const SepVector one = SepVector::rank_one(2.0, {Vector::LinSpaced(10, 1, 2), Vector::LinSpaced(12, 1, 3),
                                                  Vector::LinSpaced(11, 1, 4)});
  const Matrix outer = one.scale(0) * one.factor(1)(6, 0) * one.factor(2).col(0) * one.factor(0).col(0).transpose();
  const double wrapped[3] = {0.0, 1.0, 0.0};  // b = 1 wraps to node 0
  const Slice r2 = export_slice(one, g, wrapped, 2, 0);
  CHECK(r2.fixed_nodes[1] == 0);
  const double mid[3] = {0.0, 0.0, 0.0};
  const Slice r3 = export_slice(one, g, mid, 2, 0);
  CHECK((r3.values - outer).norm() < 1e-12 * outer.norm());

  const double outside[3] = {0.0, 0.0, 2.5};
  CHECK_THROWS_AS(export_slice(psi, g, outside, 0, 1), DomainError);
  CHECK_THROWS_AS(export_slice(psi, g, fixed, 1, 1), std::invalid_argument);

  const Slice v = export_slice(one, g, fixed, 0, 1, SliceQuantity::value, 2.0, 1e-12);
  CHECK(v.values(3, 4) == doctest::Approx(-2.0 * std::log(export_slice(one, g, fixed, 0, 1).values(3, 4))));
}
