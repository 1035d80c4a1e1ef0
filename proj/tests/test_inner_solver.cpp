#include <doctest.h>

#include <cmath>

#include "dirsens/inner_solver.hpp"
#include "test_helpers.hpp"

using namespace dirsens;
using namespace dirsens::solver;
using dirsens::testing::Rng;

namespace {

expr::ParametricProblem load(const char* text) { return expr::parse_problem(text); }

const char* kCubeRoot = R"(problem cuberoot
params n=1
vars m=1
box y1 in [-2, 2]
min y1
st x1 - y1^3 in NonPositive
)";

const char* kDanskin = R"(problem danskin
params n=1
vars m=1
box y1 in [-1, 1]
min x1*y1
st y1 in Poly{[1, 1], [-1, 1]}
)";

const char* kInfeasible = R"(problem infeasible
params n=1
vars m=1
box y1 in [1, 2]
min y1
st y1 in Zero
)";

const char* kLpAdditive = R"(problem lp_additive
params n=1
vars m=1
box y1 in [-3, 3]
min y1
st -y1 - x1 in NonPositive
)";

}  // namespace

TEST_CASE("solve_value: cube-root value function") {
  auto prob = load(kCubeRoot);
  auto r = solve_value(prob, make_vec({0.008}));
  REQUIRE(r.finite());
  CHECK(std::abs(r.value - 0.2) <= 1e-4);
  REQUIRE(!r.argmins.empty());
  CHECK(std::abs(r.argmins[0][0] - 0.2) <= 1e-4);
}

TEST_CASE("solve_value: flat objective keeps the whole box optimal") {
  auto prob = load(kDanskin);
  auto r = solve_value(prob, make_vec({0.0}));
  REQUIRE(r.finite());
  CHECK(r.value == doctest::Approx(0.0));
  CHECK(r.argmins.size() >= 100);  // the box sample at value 0
  double lo = 1e9, hi = -1e9;
  for (const Vec& y : r.argmins) {
    lo = std::min(lo, y[0]);
    hi = std::max(hi, y[0]);
  }
  CHECK(lo == doctest::Approx(-1.0));
  CHECK(hi == doctest::Approx(1.0));
}

TEST_CASE("solve_value: two decision variables") {
  auto prob = load(R"(problem quad2
params n=2
vars m=2
box y1 in [-1, 1]
box y2 in [-1, 1]
min (y1 - x1)^2 + (y2 + x2)^2
st y1 - 1 in NonPositive
)");
  SolveOptions opts;
  opts.grid_points = 81;
  auto r = solve_value(prob, make_vec({0.3, 0.4}), opts);
  REQUIRE(r.finite());
  CHECK(std::abs(r.value) <= 1e-6);
  REQUIRE(!r.argmins.empty());
  CHECK(std::abs(r.argmins[0][0] - 0.3) <= 1e-4);
  CHECK(std::abs(r.argmins[0][1] + 0.4) <= 1e-4);
}

TEST_CASE("solve_value: infeasible instance returns the +inf marker") {
  auto prob = load(kInfeasible);
  auto r = solve_value(prob, make_vec({0.0}));
  CHECK_FALSE(r.finite());
  CHECK(r.argmins.empty());
}

TEST_CASE("solve_value invariants: grid lower bound and monotone refinement") {
  auto prob = load(kCubeRoot);
  SolveOptions coarse;
  coarse.grid_points = 101;
  SolveOptions fine;
  fine.grid_points = 201;
  for (double x : {0.1, 0.5, -0.3}) {
    auto rc = solve_value(prob, make_vec({x}), coarse);
    auto rf = solve_value(prob, make_vec({x}), fine);
    REQUIRE(rc.finite());
    // Halving the grid step never worsens the estimate by more than tol.
    CHECK(rf.value <= rc.value + coarse.tol * (1.0 + std::abs(rc.value)));
    // Estimator is a lower bound against every feasible grid point.
    for (double y = -2.0; y <= 2.0; y += 0.04) {
      if (x - y * y * y <= 0)
        CHECK(rc.value <= y + coarse.tol * (1.0 + std::abs(y)) + 1e-9);
    }
    // Every argmin is feasible with value close to the estimate.
    for (const Vec& y : rc.argmins) {
      CHECK(prob.feasible(make_vec({x}), y));
      CHECK(std::abs(y[0] - rc.value) <= coarse.cluster_tol * (1 + std::abs(rc.value)));
    }
  }
}

TEST_CASE("directional_solutions: cube-root at the origin") {
  auto prob = load(kCubeRoot);
  SequenceSchedule sched;
  auto est = directional_solutions(prob, make_vec({0.0}), make_vec({1.0}), sched);
  REQUIRE(est.points.size() == 1);
  CHECK(std::abs(est.points[0][0]) <= 1e-6);  // S(0;1) = {0}
  CHECK(prob.feasible(make_vec({0.0}), est.points[0]));
  // Rate exponent of the t^{1/3} argmin convergence feeds the calmness logic.
  REQUIRE(est.rates.size() == 1);
  CHECK(est.rates[0] == doctest::Approx(1.0 / 3).epsilon(0.2));
}

TEST_CASE("directional_solutions: Danskin fixture selects the active endpoint") {
  auto prob = load(kDanskin);
  SequenceSchedule sched;
  auto est = directional_solutions(prob, make_vec({0.0}), make_vec({1.0}), sched);
  REQUIRE(!est.points.empty());
  bool has_minus_one = false;
  for (const Vec& y : est.points) has_minus_one |= std::abs(y[0] + 1.0) <= 1e-6;
  CHECK(has_minus_one);
  // Directional solutions sit inside S(0) = [-1, 1] at value 0.
  for (const Vec& y : est.points)
    CHECK(std::abs(prob.objective.eval(prob.joint(make_vec({0.0}), y))) <= 1e-9);
}

TEST_CASE("directional_solutions: zero direction matches the base solution set") {
  auto prob = load(kCubeRoot);
  SequenceSchedule sched;
  auto base = solve_value(prob, make_vec({0.3}));
  auto est = directional_solutions(prob, make_vec({0.3}), make_vec({0.0}), sched);
  REQUIRE(!est.points.empty());
  CHECK(testing::hausdorff(est.points, base.argmins) <= 5e-3);
}

TEST_CASE("stability: cube-root is inner semicontinuous but not inner calm") {
  auto prob = load(kCubeRoot);
  SequenceSchedule sched;
  auto verdicts = stability_diagnostics(prob, make_vec({0.0}), make_vec({1.0}), sched);
  const auto* sc = find_verdict(verdicts, StabilityProperty::InnerSemicontinuous);
  const auto* calm = find_verdict(verdicts, StabilityProperty::InnerCalm);
  const auto* ric = find_verdict(verdicts, StabilityProperty::RestrictedInfCompact);
  REQUIRE(sc);
  REQUIRE(calm);
  REQUIRE(ric);
  CHECK(sc->verdict == Verdict::EmpiricallyHolds);
  CHECK(calm->verdict == Verdict::EmpiricallyFails);
  CHECK(ric->verdict == Verdict::EmpiricallyHolds);
}

TEST_CASE("stability: Danskin fixture is inner calm along u = 1") {
  auto prob = load(kDanskin);
  SequenceSchedule sched;
  auto verdicts = stability_diagnostics(prob, make_vec({0.0}), make_vec({1.0}), sched);
  const auto* calm = find_verdict(verdicts, StabilityProperty::InnerCalm);
  REQUIRE(calm);
  CHECK(calm->verdict == Verdict::EmpiricallyHolds);
  REQUIRE(calm->kappa_estimate.has_value());
  CHECK(*calm->kappa_estimate <= 0.1);
}

TEST_CASE("stability: additively perturbed LP is inner calm*") {
  auto prob = load(kLpAdditive);
  SequenceSchedule sched;
  auto verdicts = stability_diagnostics(prob, make_vec({0.0}), make_vec({1.0}), sched);
  const auto* cs = find_verdict(verdicts, StabilityProperty::InnerCalmStar);
  REQUIRE(cs);
  CHECK(cs->verdict == Verdict::EmpiricallyHolds);
}

TEST_CASE("stability verdict lattice is structurally consistent") {
  SequenceSchedule sched;
  sched.shells = 12;
  for (const char* text : {kCubeRoot, kDanskin, kLpAdditive}) {
    auto prob = load(text);
    for (double u : {0.0, 1.0, -1.0}) {
      auto verdicts = stability_diagnostics(prob, make_vec({0.0}), make_vec({u}), sched);
      auto val = [&](StabilityProperty p) {
        const auto* v = find_verdict(verdicts, p);
        REQUIRE(v);
        return v->verdict;
      };
      if (val(StabilityProperty::InnerCalm) == Verdict::EmpiricallyHolds) {
        CHECK(val(StabilityProperty::InnerSemicontinuous) != Verdict::EmpiricallyFails);
        CHECK(val(StabilityProperty::InnerCalmStar) != Verdict::EmpiricallyFails);
      }
      if (val(StabilityProperty::InnerSemicontinuous) == Verdict::EmpiricallyHolds)
        CHECK(val(StabilityProperty::RestrictedInfCompact) != Verdict::EmpiricallyFails);
    }
  }
}

TEST_CASE("stability: box-truncated escape falsifies restricted inf-compactness") {
  // min x*y over a large box with no constraints: for x != 0 the true inner
  // problem is unbounded and the minimizing branch leaves every compact set;
  // the search box pins it at the boundary with an improving outward step.
  auto prob = load(R"(problem escape
params n=1
vars m=1
box y1 in [-10, 10]
min x1*y1
)");
  SequenceSchedule sched;
  sched.shells = 12;
  auto verdicts = stability_diagnostics(prob, make_vec({0.0}), make_vec({1.0}), sched);
  const auto* ric = find_verdict(verdicts, StabilityProperty::RestrictedInfCompact);
  REQUIRE(ric);
  CHECK(ric->verdict == Verdict::EmpiricallyFails);
}

TEST_CASE("value at base infinite raises") {
  auto prob = load(kInfeasible);
  SequenceSchedule sched;
  CHECK_THROWS_AS(directional_solutions(prob, make_vec({0.0}), make_vec({1.0}), sched),
                  ValueAtBaseInfinite);
}
