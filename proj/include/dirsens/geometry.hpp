#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dirsens/linalg.hpp"
#include "dirsens/schedule.hpp"

namespace dirsens::geometry {

struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct PointNotInSet : GeometryError {
  using GeometryError::GeometryError;
};
struct DimensionOverflow : GeometryError {
  using GeometryError::GeometryError;
};

// Scale-aware activity tolerance for a row <a,x> <= b.
inline double activity_tol(const Vec& a, const Vec& x) {
  return 1e-9 * (1.0 + a.norm() * x.norm());
}

struct Halfspace {
  Vec a;
  double b = 0.0;
};

// Convex polyhedron in H-representation: <a_i,x> <= b_i and <e_j,x> = c_j.
// The representation admits emptiness; use is_empty() to test.
struct Polyhedron {
  int dim = 0;
  std::vector<Halfspace> ineqs;
  std::vector<Halfspace> eqs;

  Polyhedron() = default;
  explicit Polyhedron(int d) : dim(d) {}

  static Polyhedron whole_space(int d) { return Polyhedron(d); }
  static Polyhedron empty_set(int d);
  static Polyhedron nonpositive_orthant(int d);
  static Polyhedron zero_point(int d);
  static Polyhedron box(const Vec& lo, const Vec& hi);
  static Polyhedron interval(double lo, double hi);

  void add_ineq(Vec a, double b);
  void add_eq(Vec a, double b);

  bool contains(const Vec& x) const;
  std::vector<int> active_ineqs(const Vec& x) const;
  bool is_empty() const;
  bool is_cone(double tol = 1e-12) const;
  std::optional<Vec> feasible_point() const;

  // sup of <dir,x> over the set; +inf when unbounded, -inf when empty.
  double support(const Vec& dir) const;

  bool subset_of(const Polyhedron& other, double tol = 1e-7) const;
  bool set_equals(const Polyhedron& other, double tol = 1e-7) const;

  // Unit-normalized, deduplicated, LP-irredundant rows in lexicographic
  // order. Two polyhedra built from the same row data canonicalize to the
  // same representation, enabling exact comparisons.
  Polyhedron canonicalized() const;

  // Chebyshev-like interior/feasible point used for representatives.
  std::optional<Vec> representative_point() const;
};

Polyhedron intersect(const Polyhedron& a, const Polyhedron& b);
// Cartesian product stacking coordinates of a before b.
Polyhedron product(const Polyhedron& a, const Polyhedron& b);

// Fixture format {dim, ineqs: [[a..., b]...], eqs: [[a..., b]...]}.
nlohmann::json polyhedron_to_json(const Polyhedron& p);
Polyhedron polyhedron_from_json(const nlohmann::json& j);

// Cone in generator form: cone(rays) + span(lineality). `empty` marks the
// empty set, which is distinct from the zero cone {0}.
struct GeneratorCone {
  int dim = 0;
  std::vector<Vec> rays;
  std::vector<Vec> lineality;
  bool empty = false;

  GeneratorCone() = default;
  explicit GeneratorCone(int d) : dim(d) {}

  static GeneratorCone zero(int d) { return GeneratorCone(d); }
  static GeneratorCone empty_cone(int d) {
    GeneratorCone c(d);
    c.empty = true;
    return c;
  }

  void normalize();
  bool is_zero() const { return !empty && rays.empty() && lineality.empty(); }
  bool contains(const Vec& v, double tol = 1e-9) const;
  bool subset_of(const GeneratorCone& other, double tol = 1e-9) const;
  bool set_equals(const GeneratorCone& other, double tol = 1e-9) const;
  // All generators including both signs of lineality directions.
  std::vector<Vec> generator_directions() const;
};

// Intersection of a finitely generated cone with the hyperplane {d}^perp.
GeneratorCone intersect_hyperplane(const GeneratorCone& c, const Vec& d,
                                   double tol = 1e-9);

// Directional neighborhood of `direction` anchored at `center`: offsets z
// with ||z|| <= eps and || ||d|| z - ||z|| d || <= delta ||z|| ||d||; the
// eps-ball when direction = 0.
struct DirectionalNeighborhood {
  Vec center;
  Vec direction;
  double eps = 1e-1;
  double delta = 1e-1;

  bool contains(const Vec& point, double tol = 1e-12) const;
};

// ---------------------------------------------------------------------------
// Cone calculus

Polyhedron tangent_cone(const Polyhedron& S, const Vec& x);
GeneratorCone normal_cone(const Polyhedron& S, const Vec& x);
// Formula N(x) \cap {d}^perp for d in T(x); the empty cone otherwise;
// N(x) itself when d = 0 (||d|| < 1e-12 counts as 0).
GeneratorCone directional_normal_cone(const Polyhedron& S, const Vec& x,
                                      const Vec& d);

bool in_tangent_cone(const Polyhedron& tangent, const Vec& d);

// ---------------------------------------------------------------------------
// Representation conversions

struct VRep {
  std::vector<Vec> vertices;
  GeneratorCone cone;
  bool empty() const { return vertices.empty(); }
};

// Double-description conversion; conv(vertices) + cone equals S.
VRep h_to_v(const Polyhedron& S, int dim_cap = 8);
// Hull reconstruction; inverse of h_to_v up to set equality.
Polyhedron v_to_h(const std::vector<Vec>& vertices, const GeneratorCone& cone);
// Generators of an H-represented cone (all offsets zero).
GeneratorCone cone_generators(const Polyhedron& cone_hrep, int dim_cap = 10);
// H-representation of a generated cone via the polar.
Polyhedron cone_hrep(const GeneratorCone& c);

// Fourier-Motzkin elimination onto the kept coordinates (ascending order of
// the original indices). Throws DimensionOverflow past row_cap intermediate
// rows.
Polyhedron fm_project(const Polyhedron& S, const std::vector<int>& keep,
                      int row_cap = 20000);

// ---------------------------------------------------------------------------
// Sampling

// Unit directions within chord distance delta of u/||u||; the full sphere
// when u = 0. Deterministic low-discrepancy layout, first entry exact; the
// seed shifts the layout phase.
std::vector<Vec> cap_directions(const Vec& u, double delta, int count, uint64_t seed = 0);

// Points center + t_k * u^k with t_k <= eps from the schedule and u^k in the
// delta-cap; every returned point satisfies the membership test.
std::vector<Vec> sample_dir_neighborhood(const DirectionalNeighborhood& n,
                                         const SequenceSchedule& schedule);

// ---------------------------------------------------------------------------
// Gamma factors

// Tangent and normal cone data of a factor at a point of its block.
struct FactorCones {
  Polyhedron tangent;
  std::vector<Vec> normal_rays;
  std::vector<Vec> normal_lin;
};

// One factor of the constraint set Gamma. Fixture factors carry externally
// supplied cone answers at their anchor point, for sets whose cones are known
// in closed form but which are not polyhedra.
struct GammaFactor {
  enum class Kind { NonPositive, Zero, Poly, Fixture };
  Kind kind = Kind::NonPositive;
  int count = 0;  // NonPositive/Zero block width
  Polyhedron poly;
  Polyhedron fixture_tangent;
  GeneratorCone fixture_normal;

  int dim() const;

  static GammaFactor non_positive(int k);
  static GammaFactor zero(int k);
  static GammaFactor poly_set(Polyhedron p);
  // Validates that every normal generator is polar to the tangent cone,
  // which the complementarity machinery relies on.
  static GammaFactor fixture(Polyhedron tangent, GeneratorCone normal);

  std::string kind_name() const;
};

// Cones of the factor at block value z; throws PointNotInSet when z is
// infeasible beyond tolerance. Fixture factors return their stored answers.
FactorCones factor_cones(const GammaFactor& g, const Vec& z);

// Directional limiting normal cone of the factor at z in direction d: the
// empty cone off the tangent cone, N itself at d = 0, and N intersected with
// {d}^perp otherwise.
GeneratorCone factor_directional_normal_cone(const GammaFactor& g, const Vec& z, const Vec& d);

// Membership of z in the factor's set (always true for Fixture factors,
// whose feasibility is anchored externally).
bool factor_contains(const GammaFactor& g, const Vec& z);

// Zero-slack membership on inequality rows; equality rows keep the scaled
// tolerance. The inner solver screens candidates with this to avoid the
// root-amplified bias a residual slack causes near degenerate boundaries.
bool factor_contains_strict(const GammaFactor& g, const Vec& z);

}  // namespace dirsens::geometry
