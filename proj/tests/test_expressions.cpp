#include <doctest.h>

#include <cmath>

#include "dirsens/expressions.hpp"
#include "test_helpers.hpp"

using namespace dirsens;
using namespace dirsens::expr;
using dirsens::testing::Rng;

namespace {

const std::map<std::string, int> kVars{{"x1", 0}, {"y1", 1}, {"y2", 2}};

double central_diff(const Expression& e, const Vec& z, int var, double h = 1e-5) {
  Vec zp = z, zm = z;
  zp[var] += h;
  zm[var] -= h;
  return (e.eval(zp) - e.eval(zm)) / (2.0 * h);
}

}  // namespace

TEST_CASE("eval examples") {
  CHECK(parse_expression("y1", kVars).eval(make_vec({0, 2, 0})) == 2.0);
  CHECK(parse_expression("x1 - y1^3", kVars).eval(make_vec({8, 2, 0})) == 0.0);
  CHECK_THROWS_AS(parse_expression("log(y1)", kVars).eval(make_vec({0, 0, 0})), EvalDomain);
  CHECK_THROWS_AS(parse_expression("x1/y1", kVars).eval(make_vec({1, 0, 0})), EvalDomain);
}

TEST_CASE("grad examples") {
  auto bilinear = parse_expression("x1*y1", kVars);
  CHECK(bilinear.grad_component(make_vec({0, -1, 0}), 0) == doctest::Approx(-1.0));

  auto cubic = parse_expression("y1^3", kVars);
  CHECK(cubic.grad_component(make_vec({0, 0, 0}), 1) == 0.0);

  auto kink = parse_expression("abs(y1)", kVars);
  CHECK_THROWS_AS(kink.grad_component(make_vec({0, 0, 0}), 1), NonSmoothPoint);
  CHECK(kink.grad_component(make_vec({0, 2, 0}), 1) == doctest::Approx(1.0));
  CHECK(kink.grad_component(make_vec({0, -2, 0}), 1) == doctest::Approx(-1.0));
}

TEST_CASE("min/max kinks detected, flat ties allowed") {
  auto m = parse_expression("min(y1, y2)", kVars);
  CHECK_THROWS_AS(m.grad_component(make_vec({0, 1, 1}), 1), NonSmoothPoint);
  CHECK(m.grad_component(make_vec({0, 1, 2}), 1) == doctest::Approx(1.0));
  auto same = parse_expression("max(y1, y1)", kVars);
  CHECK(same.grad_component(make_vec({0, 1, 0}), 1) == doctest::Approx(1.0));
}

TEST_CASE("forward gradients match central differences on random smooth points") {
  const char* exprs[] = {
      "x1*y1 + y2^2",
      "exp(y1) - log(2 + y2^2)",
      "sin(x1)*cos(y1) + y2^3/(2 + x1^2)",
      "sqrt(1 + y1^2) + x1^4",
      "(x1 + y1)^3 - 2*y2",
  };
  Rng rng(13);
  for (const char* s : exprs) {
    auto e = parse_expression(s, kVars);
    for (int rep = 0; rep < 200; ++rep) {
      const Vec z = rng.vec(3, -1.5, 1.5);
      for (int v = 0; v < 3; ++v) {
        const double fd = central_diff(e, z, v);
        const double ad = e.grad_component(z, v);
        CHECK(std::abs(ad - fd) <= 1e-6 * (1.0 + std::abs(fd)));
      }
    }
  }
}

TEST_CASE("parse-print round trip is the identity on the AST") {
  const char* exprs[] = {
      "x1*y1",       "x1 - y1^3",          "-y1 + 2",
      "(x1 + y1)^3", "min(y1, max(x1, 2))", "x1/(y1 - 4)*y2",
      "-(x1 + y1)",  "2^3 - x1^-2",         "abs(y1)*sqrt(y2 + 3)",
      "1.5e-3*x1",
  };
  for (const char* s : exprs) {
    auto e = parse_expression(s, kVars);
    auto round = parse_expression(e.print(), kVars);
    CHECK_MESSAGE(e.structurally_equal(round), "failed on: ", s, " printed as ", e.print());
  }
}

TEST_CASE("parse errors carry position and message") {
  CHECK_THROWS_AS(parse_expression("x1 + ", kVars), ParseError);
  CHECK_THROWS_AS(parse_expression("foo(2)", kVars), ParseError);
  CHECK_THROWS_AS(parse_expression("z9", kVars), ParseError);
  CHECK_THROWS_AS(parse_expression("y1^2.5", kVars), ParseError);
  CHECK_THROWS_AS(parse_expression("x1 @ 2", kVars), ParseError);
}

TEST_CASE("problem file: cube-root fixture parses") {
  const char* text = R"(problem cuberoot
params n=1
vars m=1
box y1 in [-2, 2]
min y1
st x1 - y1^3 in NonPositive
)";
  auto prob = parse_problem(text);
  CHECK(prob.n == 1);
  CHECK(prob.m == 1);
  CHECK(prob.p() == 1);
  REQUIRE(prob.gamma.size() == 1);
  CHECK(prob.gamma[0].kind == geometry::GammaFactor::Kind::NonPositive);
  CHECK(prob.smooth_model());
  CHECK(prob.feasible(make_vec({0}), make_vec({1})));
  CHECK_FALSE(prob.feasible(make_vec({1}), make_vec({0})));
}

TEST_CASE("problem file: Poly factor and round trip") {
  const char* text = R"(problem danskin
params n=1
vars m=1
box y1 in [-1, 1]
min x1*y1
st y1 in Poly{[1, 1], [-1, 1]}
)";
  auto prob = parse_problem(text);
  REQUIRE(prob.gamma.size() == 1);
  CHECK(prob.gamma[0].kind == geometry::GammaFactor::Kind::Poly);
  CHECK(prob.gamma[0].poly.contains(make_vec({0.5})));
  CHECK_FALSE(prob.gamma[0].poly.contains(make_vec({1.5})));

  auto printed = print_problem(prob);
  auto again = parse_problem(printed);
  CHECK(print_problem(again) == printed);
  CHECK(again.objective.structurally_equal(prob.objective));
  REQUIRE(again.p() == prob.p());
  for (int i = 0; i < prob.p(); ++i)
    CHECK(again.constraints[static_cast<size_t>(i)].structurally_equal(
        prob.constraints[static_cast<size_t>(i)]));
}

TEST_CASE("problem file: consecutive rows of the same kind fold") {
  const char* text = R"(problem folded
params n=1
vars m=2
box y1 in [-1, 1]
box y2 in [-1, 1]
min y1 + y2
st y1 - x1 in NonPositive
st y2 in NonPositive
st y1 + y2 in Zero
)";
  auto prob = parse_problem(text);
  REQUIRE(prob.gamma.size() == 2);
  CHECK(prob.gamma[0].dim() == 2);
  CHECK(prob.gamma[1].kind == geometry::GammaFactor::Kind::Zero);
}

TEST_CASE("arity mismatch raises") {
  const char* text = R"(problem bad
params n=1
vars m=1
box y1 in [-1, 1]
min y1
st (y1, x1) in Poly{[1, 1]}
)";
  CHECK_THROWS_AS(parse_problem(text), ArityError);

  expr::ParametricProblem p;
  p.n = 1;
  p.m = 1;
  p.y_lo = make_vec({-1});
  p.y_hi = make_vec({1});
  p.objective = parse_expression("y1", {{"x1", 0}, {"y1", 1}});
  p.constraints.push_back(parse_expression("y1", {{"x1", 0}, {"y1", 1}}));
  p.constraints.push_back(parse_expression("x1", {{"x1", 0}, {"y1", 1}}));
  p.gamma.push_back(geometry::GammaFactor::non_positive(1));
  CHECK_THROWS_AS(p.validate(), ArityError);
}

TEST_CASE("eval is deterministic across repeated runs") {
  auto e = parse_expression("sin(x1)*cos(y1) + exp(y2/3) - y1^5/7", kVars);
  Rng rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const Vec z = rng.vec(3, -2.0, 2.0);
    const double a = e.eval(z);
    const double b = e.eval(z);
    CHECK(a == b);
  }
}
