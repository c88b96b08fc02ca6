#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sephjb/expr.hpp"

using namespace sephjb;

TEST_CASE("evaluation") {
  const double pi = std::numbers::pi;
  CHECK(parse_expr("1 + 2 * 3").eval(0.0) == 7.0);
  CHECK(parse_expr("-x^2").eval(3.0) == -9.0);
  CHECK(parse_expr("x^-1").eval(4.0) == 0.25);
  CHECK(parse_expr("(1 - x) / 2").eval(5.0) == -2.0);
  CHECK(parse_expr("sin(pi / 2)").eval(0.0) == doctest::Approx(1.0));
  CHECK(parse_expr("19.6*sin(x)/(4/3 - 0.2*cos(x)^2)").eval(pi / 2) ==
        doctest::Approx(19.6 / (4.0 / 3.0)));
  CHECK(parse_expr("exp(log(x))").eval(2.5) == doctest::Approx(2.5));
  CHECK(parse_expr("sqrt(abs(x)) + tanh(0) + tan(0)").eval(-16.0) == 4.0);
  CHECK(parse_expr("1e-3 * x").eval(2.0) == 2e-3);
  CHECK(parse_expr("2 - 3 - 4").eval(0.0) == -5.0);
  CHECK(parse_expr("8 / 4 / 2").eval(0.0) == 1.0);
}

TEST_CASE("to_string round trip") {
  for (const char* text : {"x", "-x^2", "19.6*sin(x)/(4/3 - 0.2*cos(x)^2)", "1 - (x - 2)",
                           "pi*x^-2", "exp(-(x/0.5)^2)", "0.1", "-(-x)"}) {
    const Expr e = parse_expr(text);
    const Expr back = parse_expr(e.to_string());
    CHECK(e == back);
    for (double x : {-1.3, 0.7, 2.0}) CHECK(back.eval(x) == e.eval(x));
  }
}

TEST_CASE("constants and variables") {
  double v = 0.0;
  CHECK(parse_expr("2.5").is_constant(&v));
  CHECK(v == 2.5);
  CHECK_FALSE(parse_expr("x").is_constant());
  CHECK(parse_expr("2*x").has_variable());
  CHECK_FALSE(parse_expr("2*pi").has_variable());
  CHECK(Expr().eval(123.0) == 1.0);
}

TEST_CASE("parse errors carry the offset") {
  const auto offset_of = [](const char* text) {
    try {
      parse_expr(text);
    } catch (const ParseError& e) {
      return static_cast<long>(e.offset());
    }
    return -1L;
  };
  CHECK(offset_of("1 +") == 3);
  CHECK(offset_of("foo(x)") == 0);
  CHECK(offset_of("x + y") == 4);
  CHECK(offset_of("(x") == 2);
  CHECK(offset_of("x ^ x") >= 4);
  CHECK(offset_of("") == 0);
  CHECK(offset_of("1 2") == 2);
}

TEST_CASE("sampling reports the failing node") {
  const Grid g({Axis{"x", 11, -1.0, 1.0, false}});
  const Vector s = sample(parse_expr("x^2"), g, 0);
  CHECK(s(0) == 1.0);
  CHECK(s(5) == doctest::Approx(0.0).epsilon(1e-15));
  try {
    sample(parse_expr("log(x + 1)"), g, 0);
    FAIL("expected EvalError");
  } catch (const EvalError& e) {
    CHECK(e.node() == 0);
    CHECK(e.coordinate() == -1.0);
  }
  CHECK_THROWS_AS(sample(parse_expr("sqrt(x)"), g, 0), EvalError);
}
