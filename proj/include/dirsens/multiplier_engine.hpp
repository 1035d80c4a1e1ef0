#pragma once

#include <optional>
#include <string>

#include "dirsens/expressions.hpp"
#include "dirsens/geometry.hpp"
#include "dirsens/inner_solver.hpp"
#include "dirsens/set_estimate.hpp"
#include "dirsens/variational_oracle.hpp"

namespace dirsens::engine {

struct EngineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NonSmoothModel : EngineError {
  using EngineError::EngineError;
};
struct PointNotFeasible : EngineError {
  using EngineError::EngineError;
};
struct PatternOverflow : EngineError {
  using EngineError::EngineError;
};
struct StabilityPrereqFailed : EngineError {
  using EngineError::EngineError;
};
struct ConstraintDependsOnParameter : EngineError {
  using EngineError::EngineError;
};

struct EngineOptions {
  double slab_pad = 1e-3;  // widening of finite critical-cone slabs
  double incl_tol = 1e-3;  // inclusion distance tolerance (max-norm)
  int pattern_cap = 12;    // complementarity rays per point before overflow
};

// ---------------------------------------------------------------------------
// Cones

// {v | grad P(x_bar,y)(u,v) in T_Gamma(P(x_bar,y))}, assembled per factor.
geometry::Polyhedron linearization_cone(const expr::ParametricProblem& prob, const Vec& x_bar,
                                        const Vec& y, const Vec& u,
                                        const EngineOptions& opts = {});

// Critical cone: the linearization cone pinched by the value function's Dini
// slab  V'_- <= grad f(x_bar,y)(u,v) <= V'_+. Infinite bounds omit their
// inequality. At u = 0 the admissible bounds are 0 or +-inf (finite cap
// estimates snap to 0, keeping the cone conic as the sphere mode requires).
struct CriticalConeSpec {
  geometry::Polyhedron base;  // linearization cone in v-space
  double dini_lower = 0.0;
  double dini_upper = 0.0;
  geometry::Polyhedron cone;  // base intersected with the slab
  bool direction_is_zero = false;
};

CriticalConeSpec critical_cone(const expr::ParametricProblem& prob, const Vec& x_bar, const Vec& y,
                               const Vec& u, const oracle::DiniEstimate& dini,
                               const EngineOptions& opts = {});

// ---------------------------------------------------------------------------
// Multiplier sets

enum class DirectionMode { DirU, Dir0Sphere };

struct MultiplierPiece {
  std::vector<int> pattern;          // ray indices forced orthogonal to d
  geometry::Polyhedron lambda_set;   // polyhedron in lambda-space (dim p)
  geometry::Polyhedron zeta_set;     // zeta-projection (dim n)
  std::optional<Vec> representative_v;
};

struct MultiplierSet {
  int alpha = 1;
  DirectionMode mode = DirectionMode::DirU;
  std::vector<MultiplierPiece> pieces;
  std::string provenance;

  bool empty() const { return pieces.empty(); }
  // Max-norm distance from a point to the union of zeta pieces (inf if none).
  double zeta_distance(const Vec& zeta) const;
  bool zeta_union_is_zero(double tol = 1e-7) const;
};

// Classical Lagrange multiplier set (alpha = 1) or its singular counterpart
// (alpha = 0): stationarity plus the complementarity pattern pieces at the
// current active set. No directional content.
MultiplierSet classical_multipliers(const expr::ParametricProblem& prob, const Vec& x_bar,
                                    const Vec& y, int alpha, const EngineOptions& opts = {});

// Directional multiplier set: joint complementarity system in (lambda, v)
// with v ranging over the critical cone, resolved exactly by enumerating
// complementarity patterns. Dir0Sphere intersects the u = 0 critical cone
// with the unit sphere by dropping pieces whose v-cone is trivial.
MultiplierSet directional_multipliers(const expr::ParametricProblem& prob, const Vec& x_bar,
                                      const Vec& y, const Vec& u, const CriticalConeSpec& cone,
                                      int alpha, DirectionMode mode,
                                      const EngineOptions& opts = {});

// ---------------------------------------------------------------------------
// Theorem checkers

enum class TheoremKind { Limiting, Singular };       // Thm 3.1 / Thm 3.2 style
enum class Variant { InfCompact, CalmStar, InnerSemicontinuous, InnerCalm };
std::string to_string(TheoremKind k);
std::string to_string(Variant v);
// Whether the variant drops the sphere-mode term from the union.
bool variant_drops_sphere_term(Variant v);
solver::StabilityProperty variant_prerequisite(Variant v);

enum class InclusionOutcome { Holds, Violated, Inconclusive };
std::string to_string(InclusionOutcome o);

struct InclusionVerdict {
  TheoremKind theorem = TheoremKind::Limiting;
  Variant variant = Variant::InnerSemicontinuous;
  InclusionOutcome outcome = InclusionOutcome::Inconclusive;
  std::vector<double> distances;  // per checked lhs element
  std::optional<Vec> witness;     // violating element, when any
  std::string note;
};

// Upper-estimate inclusion: every oracle lhs element within incl_tol of the
// union of zeta-projections of the variant-appropriate multiplier sets over
// the estimated directional solutions.
InclusionVerdict check_upper_estimate(
    const expr::ParametricProblem& prob, const Vec& x_bar, const Vec& u, TheoremKind which,
    Variant variant, const SetEstimate& lhs, const SetEstimate& dir_solutions,
    const oracle::DiniEstimate& dini_u, const oracle::DiniEstimate& dini_0,
    const std::vector<solver::StabilityVerdict>& stability, const EngineOptions& opts = {});

struct LipschitzCertificate {
  bool certified = false;
  std::string reason;
};

// Sufficient condition for directional Lipschitz continuity: the union of
// singular-multiplier zeta-projections reduces to {0}.
LipschitzCertificate check_lipschitz_sufficient(
    const expr::ParametricProblem& prob, const Vec& x_bar, const Vec& u, Variant variant,
    const SetEstimate& dir_solutions, const oracle::DiniEstimate& dini_u,
    const oracle::DiniEstimate& dini_0, const std::vector<solver::StabilityVerdict>& stability,
    const EngineOptions& opts = {});

struct FoscmsResult {
  bool certified = false;
  std::string note;
};

// First-order sufficient condition for directional metric (sub)regularity of
// the joint system Gamma - P(x,y) at ((x_bar,y), 0) in direction (u, v_probe).
FoscmsResult foscms_check(const expr::ParametricProblem& prob, const Vec& x_bar, const Vec& y,
                          const Vec& u, const Vec& v_probe, const EngineOptions& opts = {});

enum class AbadieOutcome { Equal, StrictInclusion, Inconclusive };
std::string to_string(AbadieOutcome o);

struct AbadieResult {
  AbadieOutcome outcome = AbadieOutcome::Inconclusive;
  std::optional<Vec> witness;  // linearization direction with no feasible arc
  std::string note;
};

// Compares the tangent cone of {(x,y) | P(x,y) in Gamma} against the
// linearization cone by driving feasible arcs along its extreme directions.
AbadieResult abadie_check(const expr::ParametricProblem& prob, const Vec& x_bar, const Vec& y,
                          const EngineOptions& opts = {});

struct DanskinSets {
  std::vector<Vec> gradient_set;  // grad_x f(x_bar, y) over estimated S(x_bar;u)
  geometry::Polyhedron hull;
};

// Parameter-independent feasible set required (detected structurally).
DanskinSets danskin_sets(const expr::ParametricProblem& prob, const Vec& x_bar, const Vec& u,
                         const SetEstimate& dir_solutions, const EngineOptions& opts = {});

// Max-norm distance from a point to a polyhedron (LP); +inf when empty.
double polyhedron_distance(const geometry::Polyhedron& p, const Vec& point);

}  // namespace dirsens::engine
