#include <doctest.h>

#include <cmath>
#include <random>
#include <string>

#include "rtinv/errors.hpp"
#include "rtinv/expr.hpp"

using namespace rtinv;

namespace {

double eval(const std::string& s, double x) { return Expression::parse(s).evaluate(x); }

ErrorCode parse_error(const std::string& s, std::size_t* offset = nullptr) {
  try {
    (void)Expression::parse(s);
  } catch (const Error& e) {
    if (offset != nullptr && e.index()) *offset = *e.index();
    return e.code();
  }
  FAIL("expected a parse failure for '" << s << "'");
  return ErrorCode::InvalidArgument;
}

// random well-formed expression text
std::string random_expr(std::mt19937_64& rng, int depth) {
  const int pick = static_cast<int>(rng() % (depth > 0 ? 7 : 3));
  switch (pick) {
    case 0:
      return "x";
    case 1:
      return std::to_string(static_cast<int>(rng() % 9) + 1);
    case 2:
      return "0." + std::to_string(rng() % 1000);
    case 3: {
      static const char* ops[] = {"+", "-", "*"};
      return "(" + random_expr(rng, depth - 1) + ops[rng() % 3] + random_expr(rng, depth - 1) + ")";
    }
    case 4:
      return "-" + random_expr(rng, depth - 1);
    case 5: {
      static const char* fns[] = {"exp", "sin", "cos", "abs"};
      return std::string(fns[rng() % 4]) + "(" + random_expr(rng, depth - 1) + ")";
    }
    default:
      return "(" + random_expr(rng, depth - 1) + ")^" + std::to_string(rng() % 3 + 1);
  }
}

}  // namespace

TEST_SUITE("expr") {
  TEST_CASE("paper expressions") {
    CHECK(eval("30*exp(-x)", 0.0) == 30.0);
    CHECK(eval("x^2 + 4/sqrt(x)", 1.0) == 5.0);
    CHECK(eval("(3 - 25*x^2 + 5*x^3)*exp(-x)", 0.0) == 3.0);
    CHECK(eval("2*x^2", 3.0) == 18.0);
  }

  TEST_CASE("precedence and associativity") {
    CHECK(eval("-x^2", 2.0) == -4.0);
    CHECK(eval("2^3^2", 0.0) == 512.0);
    CHECK(eval("2^-1", 0.0) == 0.5);
    CHECK(eval("1 - 2 - 3", 0.0) == -4.0);
    CHECK(eval("8 / 4 / 2", 0.0) == 1.0);
    CHECK(eval("2 + 3 * 4", 0.0) == 14.0);
    CHECK(eval("--x", 3.0) == 3.0);
    CHECK(eval("+x", 3.0) == 3.0);
    CHECK(eval("1.5e2 + 2E-1", 0.0) == doctest::Approx(150.2));
  }

  TEST_CASE("constants and functions") {
    CHECK(eval("pi", 0.0) == doctest::Approx(M_PI));
    CHECK(eval("e", 0.0) == doctest::Approx(std::exp(1.0)));
    CHECK(eval("log(e^2)", 0.0) == doctest::Approx(2.0));
    CHECK(eval("sin(pi/2) + cos(0) + tan(0)", 0.0) == doctest::Approx(2.0));
    CHECK(eval("abs(-x)", 4.0) == 4.0);
    CHECK(eval("(-2)^3", 0.0) == -8.0);
    CHECK(Expression::constant(-2.5).evaluate(10.0) == -2.5);
  }

  TEST_CASE("parse errors carry an offset") {
    std::size_t off = 0;
    CHECK(parse_error("2*(x+1", &off) == ErrorCode::ParseError);
    CHECK(off == 6);
    CHECK(parse_error("") == ErrorCode::ParseError);
    CHECK(parse_error("2x") == ErrorCode::ParseError);
    CHECK(parse_error("x +") == ErrorCode::ParseError);
    off = 0;
    CHECK(parse_error("3 + y", &off) == ErrorCode::UnknownSymbol);
    CHECK(off == 4);
    CHECK(parse_error("foo(x)") == ErrorCode::UnknownSymbol);
  }

  TEST_CASE("domain errors") {
    const auto domain = [](const std::string& s, double x) {
      try {
        (void)eval(s, x);
      } catch (const Error& e) {
        return e.code() == ErrorCode::EvalDomainError;
      }
      return false;
    };
    CHECK(domain("1/x", 0.0));
    CHECK(domain("log(x)", 0.0));
    CHECK(domain("log(x)", -1.0));
    CHECK(domain("sqrt(x)", -1.0));
    CHECK(domain("x^0.5", -4.0));
    CHECK(domain("exp(x)", 1000.0));
  }

  TEST_CASE("vector evaluation") {
    const NodeGrid g({1.0, 2.0, 3.0});
    const Vector v = eval_vector(Expression::parse("x"), g);
    CHECK(v[0] == 1.0);
    CHECK(v[1] == 2.0);
    CHECK(v[2] == 3.0);
    const NodeGrid with_zero({-1.0, 0.0, 1.0});
    try {
      (void)eval_vector(Expression::parse("1/x"), with_zero);
      FAIL("expected EvalDomainError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::EvalDomainError);
      REQUIRE(e.index());
      CHECK(*e.index() == 1);
    }
  }

  TEST_CASE("render round-trips values") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
      const std::string text = random_expr(rng, 4);
      const Expression a = Expression::parse(text);
      const Expression b = Expression::parse(a.render());
      CHECK(a.source() == text);
      for (double x : {-1.3, 0.0, 0.7, 2.5}) {
        double va = 0.0;
        try {
          va = a.evaluate(x);
        } catch (const Error&) {
          CHECK_THROWS_AS((void)b.evaluate(x), Error);
          continue;
        }
        CHECK(b.evaluate(x) == va);
      }
    }
    const Expression c = Expression::constant(0.1);
    CHECK(Expression::parse(c.render()).evaluate(0.0) == 0.1);
  }
}
