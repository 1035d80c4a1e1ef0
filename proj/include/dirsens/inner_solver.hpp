#pragma once

#include <optional>
#include <string>

#include "dirsens/expressions.hpp"
#include "dirsens/schedule.hpp"
#include "dirsens/set_estimate.hpp"

namespace dirsens::solver {

struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ValueAtBaseInfinite : SolverError {
  using SolverError::SolverError;
};

struct SolveOptions {
  int grid_points = 201;     // per y dimension; m <= 3 enforced
  double tol = 1e-6;         // relative value tolerance
  double cluster_tol = 1e-3; // argmin clustering radius
  double cap_delta = 0.1;    // angular slack of directional sampling
  int max_seeds = 256;
  uint64_t seed = 0;         // phase of the deterministic sampling layout
};

struct SolveResult {
  double value = std::numeric_limits<double>::infinity();
  std::vector<Vec> argmins;
  struct Certificate {
    int grid_points = 0;
    long refine_iters = 0;
  } certificate;

  bool finite() const { return std::isfinite(value); }
};

// Global inner solve over the y box: dense feasibility-filtered grid, then
// projected coordinate descent with shrinking steps from the best cells.
// Returns the +inf marker (not an exception) when nothing is feasible.
SolveResult solve_value(const expr::ParametricProblem& prob, const Vec& x,
                        const SolveOptions& opts = {});

// Estimated directional solution set S(x_bar; u): accumulation points of
// argmin sequences along x_bar + t_k u^k, pulled back into S(x_bar) by a
// final refinement at the base point. For u = 0 the base argmins are members
// (constant sequences qualify).
SetEstimate directional_solutions(const expr::ParametricProblem& prob,
                                  const Vec& x_bar, const Vec& u,
                                  const SequenceSchedule& schedule,
                                  const SolveOptions& opts = {});

enum class StabilityProperty {
  RestrictedInfCompact,
  InnerSemicontinuous,
  InnerCalm,
  InnerCalmStar,
};
enum class Verdict { EmpiricallyHolds, EmpiricallyFails, Inconclusive };

std::string to_string(StabilityProperty p);
std::string to_string(Verdict v);

// Falsifiable empirical verdicts: a definitive failure witness produces
// EmpiricallyFails; sampled support only ever yields EmpiricallyHolds.
struct StabilityVerdict {
  StabilityProperty property;
  Verdict verdict = Verdict::Inconclusive;
  std::vector<std::string> witnesses;
  std::optional<double> kappa_estimate;
};

// Diagnostics for Figure-2 style hypotheses; the returned list is reconciled
// so the implication lattice (calm => semicontinuous => inf-compact) never
// reports a stronger property holding while a weaker one fails.
std::vector<StabilityVerdict> stability_diagnostics(const expr::ParametricProblem& prob,
                                                    const Vec& x_bar, const Vec& u,
                                                    const SequenceSchedule& schedule,
                                                    const SolveOptions& opts = {});

const StabilityVerdict* find_verdict(const std::vector<StabilityVerdict>& list,
                                     StabilityProperty p);

}  // namespace dirsens::solver
