#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>

#include "dirsens/geometry.hpp"
#include "dirsens/inner_solver.hpp"
#include "dirsens/schedule.hpp"
#include "dirsens/set_estimate.hpp"

namespace dirsens::oracle {

struct OracleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotDirectionallyLipschitz : OracleError {
  using OracleError::OracleError;
};
using solver::ValueAtBaseInfinite;

// Memoizing wrapper around a value function x -> V(x) (+inf allowed).
// Safe for concurrent evaluation; the cache is internally locked.
class ValueFunction {
 public:
  ValueFunction(int dim, std::function<double(const Vec&)> fn)
      : dim_(dim), fn_(std::move(fn)), state_(std::make_shared<State>()) {}

  double operator()(const Vec& x) const;
  int dim() const { return dim_; }

 private:
  struct State {
    std::mutex mutex;
    std::map<std::string, double> cache;
  };
  int dim_;
  std::function<double(const Vec&)> fn_;
  std::shared_ptr<State> state_;
};

// V backed by the inner solver.
ValueFunction solver_value_function(const expr::ParametricProblem& prob,
                                    const solver::SolveOptions& opts = {});

struct OracleOptions {
  double conv_tol = 1e-3;      // shell Cauchy tolerance
  double gap_tol = 1e-4;       // continuity gap floor
  double div_threshold = 1e6;  // limiting-vs-singular separation level
  double cap_delta = 0.1;      // angular slack of the sampling cap
  double minorant_slack_factor = 10.0;
  uint64_t seed = 0;           // phase of the deterministic sampling layout
};

// Dini difference-quotient estimate along a direction; ±inf entries mark
// detected divergence. lower <= upper always.
struct DiniEstimate {
  double upper = 0.0;
  double lower = 0.0;
  std::vector<double> samples;  // quotient per shell (the max over the cap
                                // for cap-sampled estimates)
};

// Quotients (V(x+t_k u) - V(x)) / t_k along the fixed ray u.
DiniEstimate dini(const ValueFunction& V, const Vec& x_bar, const Vec& u,
                  const SequenceSchedule& schedule, const OracleOptions& opts = {});

// Hadamard-style bounds: quotients over the whole delta-cap of u (the unit
// sphere when u = 0, where the quotient becomes the radial one). These are
// the bounds the critical-cone slab needs; the ray version underestimates
// them for directions approached tangentially.
DiniEstimate dini_cap(const ValueFunction& V, const Vec& x_bar, const Vec& u,
                      const SequenceSchedule& schedule, const OracleOptions& opts = {});

// Local least-squares affine fit on a sample cloud in B_radius(x), kept only
// when it verifies the minorant inequality with slack; empty otherwise.
std::vector<Vec> frechet_subgradients(const ValueFunction& V, const Vec& x, double radius,
                                      const OracleOptions& opts = {});

SetEstimate directional_limiting_subdiff(const ValueFunction& V, const Vec& x_bar, const Vec& u,
                                         const SequenceSchedule& schedule,
                                         const OracleOptions& opts = {});

// Horizon directions of diverging subgradient sequences as unit rays. The
// represented set always contains 0; rays extend it to a cone.
SetEstimate directional_singular_subdiff(const ValueFunction& V, const Vec& x_bar, const Vec& u,
                                         const SequenceSchedule& schedule,
                                         const OracleOptions& opts = {});

struct ClarkeHull {
  std::vector<Vec> vertices;
  geometry::Polyhedron hull;
};

// Convex hull of the limiting estimate; requires a nonempty bounded limiting
// estimate and a trivial singular estimate (NotDirectionallyLipschitz
// otherwise). Parameter dimension capped at 3.
ClarkeHull directional_clarke_subdiff(const ValueFunction& V, const Vec& x_bar, const Vec& u,
                                      const SequenceSchedule& schedule,
                                      const OracleOptions& opts = {});

enum class LipschitzKind { Lipschitz, NotLipschitz, Inconclusive };
struct LipschitzVerdict {
  LipschitzKind kind = LipschitzKind::Inconclusive;
  double modulus = 0.0;  // valid when Lipschitz
  std::string witness;
};
std::string to_string(LipschitzKind k);

LipschitzVerdict lipschitz_verdict(const ValueFunction& V, const Vec& x_bar, const Vec& u,
                                   const SequenceSchedule& schedule,
                                   const OracleOptions& opts = {});

enum class ContinuityKind { EmpiricallyContinuous, Discontinuous, Inconclusive };
struct ContinuityVerdict {
  ContinuityKind kind = ContinuityKind::Inconclusive;
  std::string witness;
};
std::string to_string(ContinuityKind k);

ContinuityVerdict continuity_diagnostic(const ValueFunction& V, const Vec& x_bar, const Vec& u,
                                        const SequenceSchedule& schedule,
                                        const OracleOptions& opts = {});

// Plot-ready rows: k, t, direction components, V, subgradient components, norm.
void write_shell_csv(std::ostream& out, const std::vector<ShellSample>& samples, int dim);

}  // namespace dirsens::oracle
