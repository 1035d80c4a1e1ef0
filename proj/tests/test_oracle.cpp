#include <doctest.h>

#include <cmath>

#include "dirsens/variational_oracle.hpp"
#include "test_helpers.hpp"

using namespace dirsens;
using namespace dirsens::oracle;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ValueFunction analytic(std::function<double(double)> f) {
  return ValueFunction(1, [f = std::move(f)](const Vec& x) { return f(x[0]); });
}

const SequenceSchedule kSched;

ValueFunction cbrt_fn() {
  return analytic([](double x) { return std::cbrt(x); });
}
ValueFunction neg_abs_fn() {
  return analytic([](double x) { return -std::abs(x); });
}

}  // namespace

TEST_CASE("dini: cube root blows up along u = 1") {
  auto d = dini(cbrt_fn(), make_vec({0.0}), make_vec({1.0}), kSched);
  CHECK(d.upper == kInf);
  CHECK(d.lower == kInf);  // the quotient t^{-2/3} diverges monotonically
}

TEST_CASE("dini: negative absolute value has slope -1 along u = 1") {
  auto d = dini(neg_abs_fn(), make_vec({0.0}), make_vec({1.0}), kSched);
  CHECK(d.upper == doctest::Approx(-1.0));
  CHECK(d.lower == doctest::Approx(-1.0));
}

TEST_CASE("dini: zero direction gives zero quotients") {
  auto d = dini(cbrt_fn(), make_vec({0.5}), make_vec({0.0}), kSched);
  CHECK(d.upper == 0.0);
  CHECK(d.lower == 0.0);
}

TEST_CASE("dini bounds are ordered on a battery of fixtures") {
  std::vector<ValueFunction> fns = {
      cbrt_fn(), neg_abs_fn(), analytic([](double x) { return std::abs(x); }),
      analytic([](double x) { return x * x; }), analytic([](double) { return 3.0; })};
  for (auto& v : fns)
    for (double u : {1.0, -1.0, 0.0}) {
      auto dr = dini(v, make_vec({0.0}), make_vec({u}), kSched);
      CHECK(dr.lower <= dr.upper);
      auto dc = dini_cap(v, make_vec({0.0}), make_vec({u}), kSched);
      CHECK(dc.lower <= dc.upper);
    }
}

TEST_CASE("dini_cap at u = 0 flags the radial blowup of the cube root") {
  auto d = dini_cap(cbrt_fn(), make_vec({0.0}), make_vec({0.0}), kSched);
  CHECK(d.upper == kInf);
  CHECK(d.lower == -kInf);
  auto s = dini_cap(analytic([](double x) { return 2.0 * x; }), make_vec({0.0}),
                    make_vec({0.0}), kSched);
  CHECK(std::isfinite(s.upper));
  CHECK(std::isfinite(s.lower));
}

TEST_CASE("frechet subgradients: smooth point of the cube root") {
  auto f = frechet_subgradients(cbrt_fn(), make_vec({0.008}), 1e-5);
  REQUIRE(f.size() == 1);
  CHECK(f[0][0] == doctest::Approx(8.3333).epsilon(1e-3));
}

TEST_CASE("frechet subgradients: concave kink has none, affine has its slope") {
  CHECK(frechet_subgradients(neg_abs_fn(), make_vec({0.0}), 1e-3).empty());
  auto f = frechet_subgradients(analytic([](double x) { return 2.0 * x; }), make_vec({0.0}), 1e-3);
  REQUIRE(f.size() == 1);
  CHECK(f[0][0] == doctest::Approx(2.0));
}

TEST_CASE("frechet subgradients: convex kink keeps the zero subgradient") {
  auto f = frechet_subgradients(analytic([](double x) { return std::abs(x); }), make_vec({0.0}),
                                1e-3);
  REQUIRE(f.size() == 1);
  CHECK(std::abs(f[0][0]) <= 1e-9);
}

TEST_CASE("limiting subdifferential: cube root has an empty estimate along u = 1") {
  auto est = directional_limiting_subdiff(cbrt_fn(), make_vec({0.0}), make_vec({1.0}), kSched);
  CHECK(est.points.empty());
}

TEST_CASE("limiting subdifferential: -|x| gives {-1} along u = 1") {
  auto est = directional_limiting_subdiff(neg_abs_fn(), make_vec({0.0}), make_vec({1.0}), kSched);
  REQUIRE(est.points.size() == 1);
  CHECK(est.points[0][0] == doctest::Approx(-1.0).epsilon(1e-3));
  CHECK(est.all_converged());
}

TEST_CASE("limiting subdifferential: smooth parabola gives {0}") {
  auto est = directional_limiting_subdiff(analytic([](double x) { return x * x; }),
                                          make_vec({0.0}), make_vec({1.0}), kSched);
  REQUIRE(est.points.size() == 1);
  CHECK(std::abs(est.points[0][0]) <= 1e-3);
}

TEST_CASE("singular subdifferential: cube root has ray +1, Lipschitz cases none") {
  auto est = directional_singular_subdiff(cbrt_fn(), make_vec({0.0}), make_vec({1.0}), kSched);
  REQUIRE(est.rays.size() == 1);
  CHECK(est.rays[0][0] == doctest::Approx(1.0).epsilon(1e-3));

  CHECK(directional_singular_subdiff(neg_abs_fn(), make_vec({0.0}), make_vec({1.0}), kSched)
            .rays.empty());
  CHECK(directional_singular_subdiff(analytic([](double x) { return x * x; }), make_vec({0.0}),
                                     make_vec({1.0}), kSched)
            .rays.empty());
}

TEST_CASE("clarke subdifferential: |x| at 0 in direction 0 is [-1, 1]") {
  auto hull = directional_clarke_subdiff(analytic([](double x) { return std::abs(x); }),
                                         make_vec({0.0}), make_vec({0.0}), kSched);
  REQUIRE(hull.vertices.size() == 2);
  CHECK(hull.vertices.front()[0] == doctest::Approx(-1.0).epsilon(1e-3));
  CHECK(hull.vertices.back()[0] == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("clarke subdifferential: singleton for -|x| along u = 1") {
  auto hull = directional_clarke_subdiff(neg_abs_fn(), make_vec({0.0}), make_vec({1.0}), kSched);
  REQUIRE(hull.vertices.size() == 1);
  CHECK(hull.vertices[0][0] == doctest::Approx(-1.0).epsilon(1e-3));
}

TEST_CASE("clarke subdifferential refuses non-Lipschitz directions") {
  CHECK_THROWS_AS(
      directional_clarke_subdiff(cbrt_fn(), make_vec({0.0}), make_vec({1.0}), kSched),
      NotDirectionallyLipschitz);
}

TEST_CASE("lipschitz verdicts match analytic truth") {
  struct Case {
    ValueFunction v;
    double u;
    bool lipschitz;
    double modulus;
  };
  std::vector<Case> cases;
  cases.push_back({analytic([](double x) { return std::abs(x); }), 0.0, true, 1.0});
  cases.push_back({neg_abs_fn(), 1.0, true, 1.0});
  cases.push_back({cbrt_fn(), 1.0, false, 0.0});
  // The modulus is the max sampled subgradient norm, so the parabola picks
  // up its slope at the coarsest shell (t0 = 0.1).
  cases.push_back({analytic([](double x) { return x * x; }), 0.0, true, 0.2});
  cases.push_back({analytic([](double) { return 7.0; }), 0.0, true, 0.0});
  cases.push_back({analytic([](double x) { return std::max(0.0, x); }), 0.0, true, 1.0});
  for (auto& c : cases) {
    auto verdict = lipschitz_verdict(c.v, make_vec({0.0}), make_vec({c.u}), kSched);
    if (c.lipschitz) {
      CHECK(verdict.kind == LipschitzKind::Lipschitz);
      CHECK(verdict.modulus <= c.modulus + 0.05);
    } else {
      CHECK(verdict.kind == LipschitzKind::NotLipschitz);
    }
  }
}

TEST_CASE("lipschitz verdict is consistent with the singular estimate") {
  // Prop-2.4-style consistency: Lipschitz iff singular estimate trivial.
  std::vector<ValueFunction> fns = {
      cbrt_fn(), neg_abs_fn(), analytic([](double x) { return std::abs(x); }),
      analytic([](double x) { return x * x; }),
      analytic([](double x) { return std::sqrt(std::abs(x)); })};
  for (auto& v : fns) {
    auto verdict = lipschitz_verdict(v, make_vec({0.0}), make_vec({1.0}), kSched);
    auto sing = directional_singular_subdiff(v, make_vec({0.0}), make_vec({1.0}), kSched);
    if (verdict.kind == LipschitzKind::Lipschitz) CHECK(sing.rays.empty());
    if (verdict.kind == LipschitzKind::NotLipschitz && sing.all_converged())
      CHECK(!sing.rays.empty());
  }
}

TEST_CASE("continuity diagnostic") {
  auto cont = continuity_diagnostic(cbrt_fn(), make_vec({0.0}), make_vec({1.0}), kSched);
  CHECK(cont.kind == ContinuityKind::EmpiricallyContinuous);

  // Jump fixture: V = +inf for x > 0 (empty feasible set beyond the base).
  auto jump = analytic([](double x) { return x > 0 ? kInf : 0.0; });
  auto bad = continuity_diagnostic(jump, make_vec({0.0}), make_vec({1.0}), kSched);
  CHECK(bad.kind == ContinuityKind::Discontinuous);

  auto smooth = continuity_diagnostic(analytic([](double x) { return x * x; }), make_vec({0.0}),
                                      make_vec({0.0}), kSched);
  CHECK(smooth.kind == ContinuityKind::EmpiricallyContinuous);
}

TEST_CASE("smooth fixtures: limiting estimate matches the gradient, dini the slope") {
  auto v = analytic([](double x) { return 2.0 * x + 0.5 * x * x; });
  for (double u : {1.0, -1.0}) {
    auto est = directional_limiting_subdiff(v, make_vec({0.3}), make_vec({u}), kSched);
    REQUIRE(est.points.size() == 1);
    CHECK(est.points[0][0] == doctest::Approx(2.3).epsilon(1e-4));  // V'(0.3) = 2.3
    auto d = dini(v, make_vec({0.3}), make_vec({u}), kSched);
    CHECK(d.upper == doctest::Approx(2.3 * u).epsilon(1e-3));
    CHECK(d.lower == doctest::Approx(2.3 * u).epsilon(1e-3));
  }
}

TEST_CASE("directional estimate is contained in the nondirectional one") {
  std::vector<ValueFunction> fns = {neg_abs_fn(),
                                    analytic([](double x) { return std::abs(x); }),
                                    analytic([](double x) { return std::max(0.0, x); })};
  for (auto& v : fns) {
    auto dir = directional_limiting_subdiff(v, make_vec({0.0}), make_vec({1.0}), kSched);
    auto full = directional_limiting_subdiff(v, make_vec({0.0}), make_vec({0.0}), kSched);
    for (const Vec& p : dir.points) {
      double best = kInf;
      for (const Vec& q : full.points) best = std::min(best, (p - q).norm());
      CHECK(best <= 5e-3);
    }
  }
}

TEST_CASE("two-parameter oracle: V = -|x1| - |x2| along the x1 axis") {
  // Off-axis trace subgradients are (-1, -sign(x2)); the axis itself has no
  // Frechet subgradient (concave kink), so the estimate collects both limits.
  ValueFunction v(2, [](const Vec& x) { return -std::abs(x[0]) - std::abs(x[1]); });
  SequenceSchedule sched;
  auto est = directional_limiting_subdiff(v, make_vec({0.0, 0.0}), make_vec({1.0, 0.0}), sched);
  REQUIRE(!est.points.empty());
  for (const Vec& p : est.points) {
    CHECK(p[0] == doctest::Approx(-1.0).epsilon(1e-2));
    CHECK(std::abs(p[1]) == doctest::Approx(1.0).epsilon(1e-2));
  }
  auto verdict = lipschitz_verdict(v, make_vec({0.0, 0.0}), make_vec({1.0, 0.0}), sched);
  CHECK(verdict.kind == LipschitzKind::Lipschitz);
  CHECK(verdict.modulus <= std::sqrt(2.0) + 0.05);
  CHECK(directional_singular_subdiff(v, make_vec({0.0, 0.0}), make_vec({1.0, 0.0}), sched)
            .rays.empty());
}

TEST_CASE("sampling layouts shift with the seed but stay reproducible") {
  ValueFunction v(2, [](const Vec& x) { return x.squaredNorm(); });
  SequenceSchedule sched;
  sched.shells = 6;
  OracleOptions a, b;
  a.seed = 7;
  b.seed = 7;
  auto ra = directional_limiting_subdiff(v, make_vec({0.0, 0.0}), make_vec({1.0, 0.0}), sched, a);
  auto rb = directional_limiting_subdiff(v, make_vec({0.0, 0.0}), make_vec({1.0, 0.0}), sched, b);
  REQUIRE(ra.shell_history.size() == rb.shell_history.size());
  for (size_t i = 0; i < ra.shell_history.size(); ++i) {
    CHECK(ra.shell_history[i].value == rb.shell_history[i].value);
    CHECK((ra.shell_history[i].direction - rb.shell_history[i].direction).norm() == 0.0);
  }
  OracleOptions c;
  c.seed = 9;
  auto rc = directional_limiting_subdiff(v, make_vec({0.0, 0.0}), make_vec({1.0, 0.0}), sched, c);
  bool any_different = false;
  for (size_t i = 0; i < std::min(ra.shell_history.size(), rc.shell_history.size()); ++i)
    any_different |= (ra.shell_history[i].direction - rc.shell_history[i].direction).norm() > 0;
  CHECK(any_different);
}

TEST_CASE("solver-backed value function matches the analytic cube root") {
  auto prob = expr::parse_problem(R"(problem cuberoot
params n=1
vars m=1
box y1 in [-2, 2]
min y1
st x1 - y1^3 in NonPositive
)");
  auto V = solver_value_function(prob);
  for (double x : {0.008, 0.5, -0.216}) CHECK(std::abs(V(make_vec({x})) - std::cbrt(x)) <= 1e-4);
}

TEST_CASE("shell csv rows are well formed") {
  auto est = directional_limiting_subdiff(neg_abs_fn(), make_vec({0.0}), make_vec({1.0}), kSched);
  std::ostringstream out;
  write_shell_csv(out, est.shell_history, 1);
  const std::string text = out.str();
  CHECK(text.rfind("k,t,dir0,V,sub0,norm\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') ==
        1 + static_cast<long>(est.shell_history.size()));
}
