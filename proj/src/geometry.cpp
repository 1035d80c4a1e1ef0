#include "dirsens/geometry.hpp"

#include <algorithm>
#include <cmath>

#include "dirsens/lp.hpp"

namespace dirsens::geometry {

namespace {

constexpr double kRowTol = 1e-12;
constexpr double kZeroDirTol = 1e-12;

Mat rows_to_matrix(const std::vector<Halfspace>& rows, int dim) {
  Mat m(static_cast<Eigen::Index>(rows.size()), dim);
  for (size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].a;
  return m;
}

Vec rows_to_rhs(const std::vector<Halfspace>& rows) {
  Vec v(static_cast<Eigen::Index>(rows.size()));
  for (size_t i = 0; i < rows.size(); ++i) v[static_cast<Eigen::Index>(i)] = rows[i].b;
  return v;
}

lp::Result solve_over(const Polyhedron& p, const Vec& c, bool maximize) {
  Mat a = rows_to_matrix(p.ineqs, p.dim);
  Vec b = rows_to_rhs(p.ineqs);
  Mat e = rows_to_matrix(p.eqs, p.dim);
  Vec f = rows_to_rhs(p.eqs);
  return maximize ? lp::maximize(a, b, e, f, c) : lp::solve(a, b, e, f, c);
}

}  // namespace

// ---------------------------------------------------------------------------
// Polyhedron

Polyhedron Polyhedron::empty_set(int d) {
  Polyhedron p(d);
  p.add_ineq(Vec::Zero(d), -1.0);
  return p;
}

Polyhedron Polyhedron::nonpositive_orthant(int d) {
  Polyhedron p(d);
  for (int i = 0; i < d; ++i) p.add_ineq(Vec::Unit(d, i), 0.0);
  return p;
}

Polyhedron Polyhedron::zero_point(int d) {
  Polyhedron p(d);
  for (int i = 0; i < d; ++i) p.add_eq(Vec::Unit(d, i), 0.0);
  return p;
}

Polyhedron Polyhedron::box(const Vec& lo, const Vec& hi) {
  const int d = static_cast<int>(lo.size());
  Polyhedron p(d);
  for (int i = 0; i < d; ++i) {
    p.add_ineq(Vec::Unit(d, i), hi[i]);
    p.add_ineq(-Vec::Unit(d, i), -lo[i]);
  }
  return p;
}

Polyhedron Polyhedron::interval(double lo, double hi) {
  return box(make_vec({lo}), make_vec({hi}));
}

void Polyhedron::add_ineq(Vec a, double b) {
  if (a.size() != dim) throw GeometryError("polyhedron row has wrong dimension");
  ineqs.push_back({std::move(a), b});
}

void Polyhedron::add_eq(Vec a, double b) {
  if (a.size() != dim) throw GeometryError("polyhedron row has wrong dimension");
  eqs.push_back({std::move(a), b});
}

bool Polyhedron::contains(const Vec& x) const {
  for (const auto& r : ineqs)
    if (r.a.dot(x) - r.b > activity_tol(r.a, x)) return false;
  for (const auto& r : eqs)
    if (std::abs(r.a.dot(x) - r.b) > activity_tol(r.a, x)) return false;
  return true;
}

std::vector<int> Polyhedron::active_ineqs(const Vec& x) const {
  std::vector<int> act;
  for (size_t i = 0; i < ineqs.size(); ++i)
    if (std::abs(ineqs[i].a.dot(x) - ineqs[i].b) <= activity_tol(ineqs[i].a, x))
      act.push_back(static_cast<int>(i));
  return act;
}

bool Polyhedron::is_empty() const { return !feasible_point().has_value(); }

bool Polyhedron::is_cone(double tol) const {
  for (const auto& r : ineqs)
    if (std::abs(r.b) > tol) return false;
  for (const auto& r : eqs)
    if (std::abs(r.b) > tol) return false;
  return true;
}

std::optional<Vec> Polyhedron::feasible_point() const {
  auto r = solve_over(*this, Vec::Zero(dim), false);
  if (!r.optimal()) return std::nullopt;
  return r.x;
}

double Polyhedron::support(const Vec& dir) const {
  auto r = solve_over(*this, dir, true);
  if (r.status == lp::Status::Infeasible)
    return -std::numeric_limits<double>::infinity();
  if (r.status == lp::Status::Unbounded)
    return std::numeric_limits<double>::infinity();
  return r.objective;
}

bool Polyhedron::subset_of(const Polyhedron& other, double tol) const {
  if (is_empty()) return true;
  for (const auto& r : other.ineqs) {
    const double s = support(r.a);
    if (s > r.b + tol * (1.0 + std::abs(r.b))) return false;
  }
  for (const auto& r : other.eqs) {
    const double scale = tol * (1.0 + std::abs(r.b));
    if (support(r.a) > r.b + scale) return false;
    if (support(-r.a) > -r.b + scale) return false;
  }
  return true;
}

bool Polyhedron::set_equals(const Polyhedron& other, double tol) const {
  return subset_of(other, tol) && other.subset_of(*this, tol);
}

namespace {

// Gaussian reduction of equality rows; returns false when inconsistent.
bool reduce_equalities(std::vector<Halfspace>& eqs, int dim) {
  size_t rank = 0;
  for (int col = 0; col < dim && rank < eqs.size(); ++col) {
    size_t pivot = rank;
    double best = 0.0;
    for (size_t i = rank; i < eqs.size(); ++i)
      if (std::abs(eqs[i].a[col]) > best) { best = std::abs(eqs[i].a[col]); pivot = i; }
    if (best <= kRowTol) continue;
    std::swap(eqs[rank], eqs[pivot]);
    const double p = eqs[rank].a[col];
    eqs[rank].a /= p;
    eqs[rank].b /= p;
    for (size_t i = 0; i < eqs.size(); ++i) {
      if (i == rank) continue;
      const double f = eqs[i].a[col];
      if (std::abs(f) > 0.0) {
        eqs[i].a -= f * eqs[rank].a;
        eqs[i].b -= f * eqs[rank].b;
      }
    }
    ++rank;
  }
  for (size_t i = rank; i < eqs.size(); ++i)
    if (std::abs(eqs[i].b) > 1e-9) return false;
  eqs.resize(rank);
  for (auto& r : eqs) {
    r.a = snap_zeros(r.a);
    if (std::abs(r.b) <= kRowTol) r.b = 0.0;
  }
  return true;
}

void prune_redundant_ineqs(Polyhedron& p, double tol = 1e-9) {
  // Row-dropping on an infeasible system would eventually fabricate a
  // feasible one; emptiness must be handled by the caller's representation.
  if (p.is_empty()) {
    p = Polyhedron::empty_set(p.dim);
    return;
  }
  for (size_t i = 0; i < p.ineqs.size();) {
    Polyhedron rest(p.dim);
    rest.eqs = p.eqs;
    for (size_t j = 0; j < p.ineqs.size(); ++j)
      if (j != i) rest.ineqs.push_back(p.ineqs[j]);
    // Bound the LP so redundancy shows up as a finite optimum.
    rest.add_ineq(p.ineqs[i].a, p.ineqs[i].b + 1.0);
    const double s = rest.support(p.ineqs[i].a);
    if (s <= p.ineqs[i].b + tol * (1.0 + std::abs(p.ineqs[i].b)))
      p.ineqs.erase(p.ineqs.begin() + static_cast<std::ptrdiff_t>(i));
    else
      ++i;
  }
}

void sort_rows(std::vector<Halfspace>& rows) {
  std::sort(rows.begin(), rows.end(), [](const Halfspace& x, const Halfspace& y) {
    if (lex_less(x.a, y.a)) return true;
    if (lex_less(y.a, x.a)) return false;
    return x.b < y.b;
  });
}

}  // namespace

Polyhedron Polyhedron::canonicalized() const {
  if (is_empty()) return empty_set(dim);
  Polyhedron out(dim);
  out.eqs = eqs;
  if (!reduce_equalities(out.eqs, dim)) return empty_set(dim);
  for (const auto& r : ineqs) {
    const double n = r.a.norm();
    if (n <= kRowTol) continue;  // trivial: feasible set nonempty, so b >= 0
    out.ineqs.push_back({snap_zeros(r.a / n), std::abs(r.b / n) <= kRowTol ? 0.0 : r.b / n});
  }
  sort_rows(out.ineqs);
  out.ineqs.erase(std::unique(out.ineqs.begin(), out.ineqs.end(),
                              [](const Halfspace& x, const Halfspace& y) {
                                return (x.a - y.a).lpNorm<Eigen::Infinity>() <= 1e-12 &&
                                       std::abs(x.b - y.b) <= 1e-12;
                              }),
                  out.ineqs.end());
  prune_redundant_ineqs(out);
  sort_rows(out.ineqs);
  sort_rows(out.eqs);
  return out;
}

std::optional<Vec> Polyhedron::representative_point() const {
  // Chebyshev-style center over (x, radius) with the radius capped.
  Polyhedron aug(dim + 1);
  for (const auto& r : ineqs) {
    Vec a(dim + 1);
    a.head(dim) = r.a;
    a[dim] = r.a.norm();
    aug.add_ineq(a, r.b);
  }
  for (const auto& r : eqs) {
    Vec a(dim + 1);
    a.head(dim) = r.a;
    a[dim] = 0.0;
    aug.add_eq(a, r.b);
  }
  aug.add_ineq(Vec::Unit(dim + 1, dim), 1.0);
  aug.add_ineq(-Vec::Unit(dim + 1, dim), 0.0);
  auto r = solve_over(aug, Vec::Unit(dim + 1, dim), true);
  if (r.optimal()) return Vec(r.x.head(dim));
  return feasible_point();
}

Polyhedron intersect(const Polyhedron& a, const Polyhedron& b) {
  if (a.dim != b.dim) throw GeometryError("intersect: dimension mismatch");
  Polyhedron out = a;
  out.ineqs.insert(out.ineqs.end(), b.ineqs.begin(), b.ineqs.end());
  out.eqs.insert(out.eqs.end(), b.eqs.begin(), b.eqs.end());
  return out;
}

nlohmann::json polyhedron_to_json(const Polyhedron& p) {
  nlohmann::json j;
  j["dim"] = p.dim;
  auto rows = [](const std::vector<Halfspace>& list) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& r : list) {
      nlohmann::json row = nlohmann::json::array();
      for (int i = 0; i < r.a.size(); ++i) row.push_back(r.a[i]);
      row.push_back(r.b);
      out.push_back(row);
    }
    return out;
  };
  j["ineqs"] = rows(p.ineqs);
  j["eqs"] = rows(p.eqs);
  return j;
}

Polyhedron polyhedron_from_json(const nlohmann::json& j) {
  Polyhedron p(j.at("dim").get<int>());
  auto read = [&](const nlohmann::json& rows, bool eq) {
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != p.dim + 1)
        throw GeometryError("polyhedron json row has wrong width");
      Vec a(p.dim);
      for (int i = 0; i < p.dim; ++i) a[i] = row[static_cast<size_t>(i)].get<double>();
      const double b = row[static_cast<size_t>(p.dim)].get<double>();
      if (eq)
        p.add_eq(a, b);
      else
        p.add_ineq(a, b);
    }
  };
  if (j.contains("ineqs")) read(j["ineqs"], false);
  if (j.contains("eqs")) read(j["eqs"], true);
  return p;
}

Polyhedron product(const Polyhedron& a, const Polyhedron& b) {
  Polyhedron out(a.dim + b.dim);
  auto lift = [&](const Halfspace& r, int offset, int total) {
    Vec v = Vec::Zero(total);
    v.segment(offset, r.a.size()) = r.a;
    return Halfspace{v, r.b};
  };
  for (const auto& r : a.ineqs) out.ineqs.push_back(lift(r, 0, out.dim));
  for (const auto& r : a.eqs) out.eqs.push_back(lift(r, 0, out.dim));
  for (const auto& r : b.ineqs) out.ineqs.push_back(lift(r, a.dim, out.dim));
  for (const auto& r : b.eqs) out.eqs.push_back(lift(r, a.dim, out.dim));
  return out;
}

// ---------------------------------------------------------------------------
// GeneratorCone

void GeneratorCone::normalize() {
  if (empty) {
    rays.clear();
    lineality.clear();
    return;
  }
  // Orthonormalize the lineality space.
  std::vector<Vec> lin;
  for (Vec l : lineality) {
    for (const Vec& prev : lin) l -= prev.dot(l) * prev;
    if (l.norm() > 1e-10) lin.push_back(unitize(l));
  }
  // Canonical sign and order.
  for (Vec& l : lin) {
    l = snap_zeros(l);
    for (Eigen::Index i = 0; i < l.size(); ++i) {
      if (l[i] != 0.0) {
        if (l[i] < 0.0) l = -l;
        break;
      }
    }
  }
  std::sort(lin.begin(), lin.end(), [](const Vec& a, const Vec& b) { return lex_less(a, b); });
  lineality = std::move(lin);

  std::vector<Vec> out;
  for (const Vec& r : rays) {
    Vec v = r;
    for (const Vec& l : lineality) v -= l.dot(v) * l;  // modulo lineality
    if (v.norm() <= 1e-10) continue;
    v = snap_zeros(unitize(v));
    bool dup = false;
    for (const Vec& o : out)
      if ((o - v).lpNorm<Eigen::Infinity>() <= 1e-9) { dup = true; break; }
    if (!dup) out.push_back(v);
  }
  std::sort(out.begin(), out.end(), [](const Vec& a, const Vec& b) { return lex_less(a, b); });
  rays = std::move(out);
}

bool GeneratorCone::contains(const Vec& v, double tol) const {
  if (empty) return false;
  const auto k = static_cast<Eigen::Index>(rays.size());
  const auto l = static_cast<Eigen::Index>(lineality.size());
  if (k + l == 0) return v.norm() <= tol;
  Mat gen(dim, k + l);
  for (Eigen::Index i = 0; i < k; ++i) gen.col(i) = rays[static_cast<size_t>(i)];
  for (Eigen::Index i = 0; i < l; ++i) gen.col(k + i) = lineality[static_cast<size_t>(i)];
  // Feasibility of gen * [mu; nu] = v with mu >= 0, within tol per coordinate.
  Mat a = Mat::Zero(k, k + l);
  a.leftCols(k) = -Mat::Identity(k, k);
  auto r = lp::solve(a, Vec::Zero(k), gen, v, Vec::Zero(k + l));
  if (r.optimal()) return true;
  // Retry with a tolerance band to absorb unit-normalization noise.
  Mat a2 = Mat::Zero(k + 2 * dim, k + l);
  a2.topLeftCorner(k, k) = -Mat::Identity(k, k);
  a2.block(k, 0, dim, k + l) = gen;
  a2.block(k + dim, 0, dim, k + l) = -gen;
  Vec b2 = Vec::Zero(k + 2 * dim);
  for (int i = 0; i < dim; ++i) {
    b2[k + i] = v[i] + tol;
    b2[k + dim + i] = -v[i] + tol;
  }
  return lp::feasible(a2, b2, Mat(0, k + l), Vec(0));
}

bool GeneratorCone::subset_of(const GeneratorCone& other, double tol) const {
  if (empty) return true;
  if (other.empty) return false;  // every nonempty cone contains 0
  for (const Vec& r : rays)
    if (!other.contains(r, tol)) return false;
  for (const Vec& l : lineality)
    if (!other.contains(l, tol) || !other.contains(Vec(-l), tol)) return false;
  return true;
}

bool GeneratorCone::set_equals(const GeneratorCone& other, double tol) const {
  if (empty != other.empty) return false;
  if (empty) return true;
  return subset_of(other, tol) && other.subset_of(*this, tol);
}

std::vector<Vec> GeneratorCone::generator_directions() const {
  std::vector<Vec> g = rays;
  for (const Vec& l : lineality) {
    g.push_back(l);
    g.push_back(Vec(-l));
  }
  return g;
}

GeneratorCone intersect_hyperplane(const GeneratorCone& c, const Vec& d, double tol) {
  if (c.empty) return c;
  GeneratorCone out(c.dim);
  std::vector<Vec> lin = c.lineality;
  std::vector<Vec> rays = c.rays;

  // Pivot a lineality direction with nonzero inner product, if any.
  int pivot = -1;
  double best = tol;
  for (size_t i = 0; i < lin.size(); ++i) {
    const double s = std::abs(d.dot(lin[i]));
    if (s > best) { best = s; pivot = static_cast<int>(i); }
  }
  if (pivot >= 0) {
    const Vec b0 = lin[static_cast<size_t>(pivot)];
    const double s0 = d.dot(b0);
    lin.erase(lin.begin() + pivot);
    for (Vec& l : lin) l -= (d.dot(l) / s0) * b0;
    for (Vec& r : rays) r -= (d.dot(r) / s0) * b0;
    out.lineality = std::move(lin);
    out.rays = std::move(rays);
    out.normalize();
    return out;
  }
  out.lineality = std::move(lin);
  std::vector<Vec> keep, pos, neg;
  for (const Vec& r : rays) {
    const double s = d.dot(r);
    if (std::abs(s) <= tol * (1.0 + d.norm()))
      keep.push_back(r);
    else if (s > 0)
      pos.push_back(r);
    else
      neg.push_back(r);
  }
  for (const Vec& p : pos)
    for (const Vec& n : neg) keep.push_back(d.dot(p) * n - d.dot(n) * p);
  out.rays = std::move(keep);
  out.normalize();
  return out;
}

// ---------------------------------------------------------------------------
// DirectionalNeighborhood

bool DirectionalNeighborhood::contains(const Vec& point, double tol) const {
  const Vec z = point - center;
  const double zn = z.norm();
  if (zn > eps * (1.0 + tol)) return false;
  const double dn = direction.norm();
  if (dn < kZeroDirTol || zn < tol) return true;
  return (dn * z - zn * direction).norm() <= delta * zn * dn + tol;
}

// ---------------------------------------------------------------------------
// Cone calculus

Polyhedron tangent_cone(const Polyhedron& S, const Vec& x) {
  if (!S.contains(x)) throw PointNotInSet("tangent_cone: point not in set");
  Polyhedron t(S.dim);
  for (int i : S.active_ineqs(x)) t.add_ineq(S.ineqs[static_cast<size_t>(i)].a, 0.0);
  for (const auto& r : S.eqs) t.add_eq(r.a, 0.0);
  return t;
}

GeneratorCone normal_cone(const Polyhedron& S, const Vec& x) {
  if (!S.contains(x)) throw PointNotInSet("normal_cone: point not in set");
  GeneratorCone n(S.dim);
  for (int i : S.active_ineqs(x)) n.rays.push_back(S.ineqs[static_cast<size_t>(i)].a);
  for (const auto& r : S.eqs) n.lineality.push_back(r.a);
  n.normalize();
  return n;
}

bool in_tangent_cone(const Polyhedron& tangent, const Vec& d) {
  for (const auto& r : tangent.ineqs)
    if (r.a.dot(d) > 1e-9 * (1.0 + r.a.norm() * d.norm())) return false;
  for (const auto& r : tangent.eqs)
    if (std::abs(r.a.dot(d)) > 1e-9 * (1.0 + r.a.norm() * d.norm())) return false;
  return true;
}

GeneratorCone directional_normal_cone(const Polyhedron& S, const Vec& x, const Vec& d) {
  GeneratorCone n = normal_cone(S, x);
  if (d.norm() < kZeroDirTol) return n;
  if (!in_tangent_cone(tangent_cone(S, x), d)) return GeneratorCone::empty_cone(S.dim);
  return intersect_hyperplane(n, d);
}

// ---------------------------------------------------------------------------
// Double description

namespace {

class DoubleDescription {
 public:
  explicit DoubleDescription(int dim) : dim_(dim) {
    for (int i = 0; i < dim; ++i) lin_.push_back(Vec::Unit(dim, i));
  }

  void add_inequality(const Vec& a_raw) {
    const Vec a = unitize(a_raw);
    if (a.norm() == 0.0) return;
    if (pivot_lineality(a, true)) {
      processed_.push_back(a);
      refresh_zero_sets();
      return;
    }
    split_rays(a, /*keep_negative=*/true);
    processed_.push_back(a);
    refresh_zero_sets();
  }

  void add_equality(const Vec& e_raw) {
    const Vec e = unitize(e_raw);
    if (e.norm() == 0.0) return;
    if (pivot_lineality(e, false)) {
      processed_.push_back(e);
      refresh_zero_sets();
      return;
    }
    split_rays(e, /*keep_negative=*/false);
    processed_.push_back(e);
    refresh_zero_sets();
  }

  GeneratorCone result() {
    GeneratorCone c(dim_);
    c.rays = rays_;
    c.lineality = lin_;
    c.normalize();
    prune_nonextreme(c);
    return c;
  }

 private:
  // Eliminates one lineality direction against the new constraint. For an
  // inequality the pivot direction survives as a ray on the feasible side.
  bool pivot_lineality(const Vec& a, bool add_ray) {
    int pivot = -1;
    double best = 1e-10;
    for (size_t i = 0; i < lin_.size(); ++i) {
      const double s = std::abs(a.dot(lin_[i]));
      if (s > best) { best = s; pivot = static_cast<int>(i); }
    }
    if (pivot < 0) return false;
    const Vec b0 = lin_[static_cast<size_t>(pivot)];
    const double s0 = a.dot(b0);
    lin_.erase(lin_.begin() + pivot);
    for (Vec& l : lin_) l -= (a.dot(l) / s0) * b0;
    for (Vec& r : rays_) r -= (a.dot(r) / s0) * b0;
    if (add_ray) rays_.push_back(unitize(s0 > 0 ? Vec(-b0) : b0));
    return true;
  }

  void split_rays(const Vec& a, bool keep_negative) {
    std::vector<Vec> zero, pos, neg;
    for (const Vec& r : rays_) {
      const double s = a.dot(r);
      if (std::abs(s) <= 1e-10)
        zero.push_back(r);
      else if (s > 0)
        pos.push_back(r);
      else
        neg.push_back(r);
    }
    std::vector<Vec> next = zero;
    if (keep_negative) next.insert(next.end(), neg.begin(), neg.end());
    for (const Vec& p : pos) {
      for (const Vec& n : neg) {
        if (!adjacent(p, n)) continue;
        next.push_back(unitize(a.dot(p) * n - a.dot(n) * p));
      }
    }
    rays_ = std::move(next);
  }

  std::vector<bool> zero_set(const Vec& r) const {
    std::vector<bool> z(processed_.size());
    for (size_t i = 0; i < processed_.size(); ++i)
      z[i] = std::abs(processed_[i].dot(r)) <= 1e-9;
    return z;
  }

  void refresh_zero_sets() {
    zero_sets_.clear();
    for (const Vec& r : rays_) zero_sets_.push_back(zero_set(r));
  }

  bool adjacent(const Vec& p, const Vec& n) const {
    if (processed_.empty()) return true;
    const auto zp = zero_set(p);
    const auto zn = zero_set(n);
    std::vector<bool> common(zp.size());
    for (size_t i = 0; i < zp.size(); ++i) common[i] = zp[i] && zn[i];
    for (size_t ri = 0; ri < rays_.size(); ++ri) {
      const Vec& r = rays_[ri];
      if ((r - p).lpNorm<Eigen::Infinity>() <= 1e-12 ||
          (r - n).lpNorm<Eigen::Infinity>() <= 1e-12)
        continue;
      const auto& zr = zero_sets_[ri];
      bool covers = true;
      for (size_t i = 0; i < common.size(); ++i)
        if (common[i] && !zr[i]) { covers = false; break; }
      if (covers) return false;
    }
    return true;
  }

  // Drops rays that are conic combinations of the others.
  static void prune_nonextreme(GeneratorCone& c) {
    if (c.rays.size() <= 1) return;
    for (size_t i = 0; i < c.rays.size();) {
      GeneratorCone rest(c.dim);
      rest.lineality = c.lineality;
      for (size_t j = 0; j < c.rays.size(); ++j)
        if (j != i) rest.rays.push_back(c.rays[j]);
      if (rest.contains(c.rays[i], 1e-9))
        c.rays.erase(c.rays.begin() + static_cast<std::ptrdiff_t>(i));
      else
        ++i;
    }
  }

  int dim_;
  std::vector<Vec> lin_;
  std::vector<Vec> rays_;
  std::vector<Vec> processed_;
  std::vector<std::vector<bool>> zero_sets_;
};

}  // namespace

GeneratorCone cone_generators(const Polyhedron& cone, int dim_cap) {
  if (cone.dim > dim_cap)
    throw DimensionOverflow("cone_generators: dimension above cap");
  DoubleDescription dd(cone.dim);
  for (const auto& r : cone.eqs) dd.add_equality(r.a);
  for (const auto& r : cone.ineqs) dd.add_inequality(r.a);
  return dd.result();
}

VRep h_to_v(const Polyhedron& S, int dim_cap) {
  if (S.dim > dim_cap) throw DimensionOverflow("h_to_v: dimension above cap");
  // Homogenize in dimension dim+1 with slack coordinate t >= 0.
  Polyhedron cone(S.dim + 1);
  for (const auto& r : S.ineqs) {
    Vec a(S.dim + 1);
    a.head(S.dim) = r.a;
    a[S.dim] = -r.b;
    cone.add_ineq(a, 0.0);
  }
  for (const auto& r : S.eqs) {
    Vec a(S.dim + 1);
    a.head(S.dim) = r.a;
    a[S.dim] = -r.b;
    cone.add_eq(a, 0.0);
  }
  cone.add_ineq(-Vec::Unit(S.dim + 1, S.dim), 0.0);

  GeneratorCone g = cone_generators(cone, dim_cap + 1);
  VRep out;
  out.cone = GeneratorCone(S.dim);
  for (const Vec& l : g.lineality) {
    // t >= 0 forces lineality into the t = 0 slice.
    Vec x = l.head(S.dim);
    if (x.norm() > 1e-10) out.cone.lineality.push_back(x);
  }
  for (const Vec& r : g.rays) {
    const double t = r[S.dim];
    if (t > 1e-7)
      out.vertices.push_back(Vec(r.head(S.dim) / t));
    else if (t > -1e-7) {
      Vec x = r.head(S.dim);
      if (x.norm() > 1e-10) out.cone.rays.push_back(x);
    }
  }
  out.cone.normalize();
  std::sort(out.vertices.begin(), out.vertices.end(),
            [](const Vec& a, const Vec& b) { return lex_less(a, b); });
  // Merge vertices that coincide up to conversion noise.
  out.vertices.erase(std::unique(out.vertices.begin(), out.vertices.end(),
                                 [](const Vec& a, const Vec& b) {
                                   return (a - b).norm() <= 1e-9 * (1.0 + a.norm());
                                 }),
                     out.vertices.end());
  return out;
}

Polyhedron cone_hrep(const GeneratorCone& c) {
  if (c.empty) return Polyhedron::empty_set(c.dim);
  // Polar: {w | <w,g> <= 0 for rays, <w,l> = 0 for lineality}.
  Polyhedron polar(c.dim);
  for (const Vec& r : c.rays) polar.add_ineq(r, 0.0);
  for (const Vec& l : c.lineality) polar.add_eq(l, 0.0);
  GeneratorCone pg = cone_generators(polar, c.dim + 2);
  Polyhedron out(c.dim);
  for (const Vec& w : pg.rays) out.add_ineq(w, 0.0);
  for (const Vec& w : pg.lineality) out.add_eq(w, 0.0);
  return out;
}

Polyhedron v_to_h(const std::vector<Vec>& vertices, const GeneratorCone& cone) {
  const int dim = cone.dim > 0 ? cone.dim
                               : (vertices.empty() ? 0 : static_cast<int>(vertices.front().size()));
  if (vertices.empty()) return Polyhedron::empty_set(dim);
  GeneratorCone lifted(dim + 1);
  for (const Vec& v : vertices) {
    Vec g(dim + 1);
    g.head(dim) = v;
    g[dim] = 1.0;
    lifted.rays.push_back(g);
  }
  for (const Vec& r : cone.rays) {
    Vec g = Vec::Zero(dim + 1);
    g.head(dim) = r;
    lifted.rays.push_back(g);
  }
  for (const Vec& l : cone.lineality) {
    Vec g = Vec::Zero(dim + 1);
    g.head(dim) = l;
    lifted.lineality.push_back(g);
  }
  Polyhedron hom = cone_hrep(lifted);
  Polyhedron out(dim);
  auto emit = [&](const Halfspace& row, bool eq) {
    Vec a = row.a.head(dim);
    const double beta = row.a[dim];
    if (a.norm() <= 1e-10) {
      if (!eq && beta > 1e-9) throw GeometryError("v_to_h: inconsistent hull row");
      return;  // trivial row
    }
    if (eq)
      out.add_eq(a, -beta);
    else
      out.add_ineq(a, -beta);
  };
  for (const auto& r : hom.ineqs) emit(r, false);
  for (const auto& r : hom.eqs) emit(r, true);
  return out.canonicalized();
}

// ---------------------------------------------------------------------------
// Fourier-Motzkin

Polyhedron fm_project(const Polyhedron& S, const std::vector<int>& keep, int row_cap) {
  std::vector<int> kept = keep;
  std::sort(kept.begin(), kept.end());
  kept.erase(std::unique(kept.begin(), kept.end()), kept.end());
  for (int k : kept)
    if (k < 0 || k >= S.dim) throw GeometryError("fm_project: keep index out of range");
  if (S.is_empty()) return Polyhedron::empty_set(static_cast<int>(kept.size()));

  std::vector<Halfspace> ineqs = S.ineqs;
  std::vector<Halfspace> eqs = S.eqs;
  std::vector<int> cols(static_cast<size_t>(S.dim));
  for (int i = 0; i < S.dim; ++i) cols[static_cast<size_t>(i)] = i;

  auto erase_col = [](std::vector<Halfspace>& rows, int j) {
    for (auto& r : rows) {
      Vec a(r.a.size() - 1);
      a.head(j) = r.a.head(j);
      a.tail(a.size() - j) = r.a.tail(r.a.size() - j - 1);
      r.a = std::move(a);
    }
  };

  auto cleanup = [&](int dim_now) -> bool {
    // Returns false when a trivially infeasible row appears.
    auto scan = [&](std::vector<Halfspace>& rows, bool eq) {
      for (size_t i = 0; i < rows.size();) {
        if (rows[i].a.lpNorm<Eigen::Infinity>() <= 1e-11) {
          const bool bad = eq ? std::abs(rows[i].b) > 1e-9 : rows[i].b < -1e-9;
          if (bad) return false;
          rows.erase(rows.begin() + static_cast<std::ptrdiff_t>(i));
        } else {
          ++i;
        }
      }
      return true;
    };
    if (!scan(ineqs, false) || !scan(eqs, true)) return false;
    // Normalize + dedupe inequalities.
    for (auto& r : ineqs) {
      const double n = r.a.norm();
      r.a /= n;
      r.b /= n;
      r.a = snap_zeros(r.a);
    }
    sort_rows(ineqs);
    // Merge rows with (near-)identical normals, keeping the tight offset.
    for (size_t i = 0; i + 1 < ineqs.size();) {
      if ((ineqs[i].a - ineqs[i + 1].a).lpNorm<Eigen::Infinity>() <= 1e-10) {
        ineqs[i].b = std::min(ineqs[i].b, ineqs[i + 1].b);
        ineqs.erase(ineqs.begin() + static_cast<std::ptrdiff_t>(i) + 1);
      } else {
        ++i;
      }
    }
    if (static_cast<int>(ineqs.size()) > 48) {
      Polyhedron tmp(dim_now);
      tmp.ineqs = ineqs;
      tmp.eqs = eqs;
      prune_redundant_ineqs(tmp);
      ineqs = tmp.ineqs;
    }
    return true;
  };

  while (static_cast<int>(cols.size()) > static_cast<int>(kept.size())) {
    // Next column to drop: the first alive column not kept.
    int drop = -1;
    for (size_t i = 0; i < cols.size(); ++i) {
      if (!std::binary_search(kept.begin(), kept.end(), cols[i])) {
        drop = static_cast<int>(i);
        break;
      }
    }
    const int j = drop;

    // Prefer a Gaussian pivot on an equality row.
    int eq_pivot = -1;
    double best = 1e-10;
    for (size_t i = 0; i < eqs.size(); ++i)
      if (std::abs(eqs[i].a[j]) > best) { best = std::abs(eqs[i].a[j]); eq_pivot = static_cast<int>(i); }
    if (eq_pivot >= 0) {
      const Halfspace piv = eqs[static_cast<size_t>(eq_pivot)];
      eqs.erase(eqs.begin() + eq_pivot);
      auto substitute = [&](Halfspace& r) {
        const double f = r.a[j] / piv.a[j];
        if (f != 0.0) {
          r.a -= f * piv.a;
          r.b -= f * piv.b;
        }
      };
      for (auto& r : ineqs) substitute(r);
      for (auto& r : eqs) substitute(r);
    } else {
      std::vector<Halfspace> zero, pos, neg;
      for (const auto& r : ineqs) {
        if (r.a[j] > 1e-10)
          pos.push_back(r);
        else if (r.a[j] < -1e-10)
          neg.push_back(r);
        else
          zero.push_back(r);
      }
      if (static_cast<long>(zero.size()) + static_cast<long>(pos.size()) * static_cast<long>(neg.size()) >
          row_cap)
        throw DimensionOverflow("fm_project: intermediate row count above cap");
      std::vector<Halfspace> next = zero;
      for (const auto& p : pos) {
        for (const auto& n : neg) {
          Halfspace h;
          h.a = p.a[j] * n.a - n.a[j] * p.a;
          h.b = p.a[j] * n.b - n.a[j] * p.b;
          next.push_back(std::move(h));
        }
      }
      ineqs = std::move(next);
    }
    erase_col(ineqs, j);
    erase_col(eqs, j);
    cols.erase(cols.begin() + j);
    if (!cleanup(static_cast<int>(cols.size()))) {
      return Polyhedron::empty_set(static_cast<int>(kept.size()));
    }
    if (static_cast<int>(ineqs.size()) > row_cap)
      throw DimensionOverflow("fm_project: row count above cap");
  }

  Polyhedron out(static_cast<int>(kept.size()));
  out.ineqs = std::move(ineqs);
  out.eqs = std::move(eqs);
  if (!reduce_equalities(out.eqs, out.dim)) return Polyhedron::empty_set(out.dim);
  prune_redundant_ineqs(out);
  return out;
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

double frac(double x) { return x - std::floor(x); }

// Deterministic unit directions for dimensions above three.
Vec lcg_unit(int dim, uint64_t& state) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    v[i] = 2.0 * (static_cast<double>(state >> 11) / 9007199254740992.0) - 1.0;
  }
  return v.norm() > 1e-12 ? Vec(unitize(v)) : Vec(Vec::Unit(dim, 0));
}

Vec rotate_from_axis(const Vec& axis, const Vec& local) {
  // Householder reflection mapping e_n to `axis`.
  const int d = static_cast<int>(axis.size());
  Vec en = Vec::Unit(d, d - 1);
  Vec w = axis - en;
  const double wn = w.norm();
  if (wn < 1e-12) return local;
  w /= wn;
  return local - 2.0 * w.dot(local) * w;
}

}  // namespace

std::vector<Vec> cap_directions(const Vec& u, double delta, int count, uint64_t seed) {
  const int dim = static_cast<int>(u.size());
  std::vector<Vec> dirs;
  const double un = u.norm();
  constexpr double kGolden = 0.6180339887498949;
  constexpr double kPlastic1 = 0.7548776662466927;
  constexpr double kPlastic2 = 0.5698402909980532;
  const double phase = static_cast<double>(seed % 997);

  if (un < kZeroDirTol) {
    if (dim == 1) {
      dirs.push_back(make_vec({1.0}));
      if (count > 1) dirs.push_back(make_vec({-1.0}));
      return dirs;
    }
    if (dim == 2) {
      for (int j = 0; j < count; ++j) {
        const double th = 2.0 * M_PI * frac((j + phase) * kGolden);
        dirs.push_back(make_vec({std::cos(th), std::sin(th)}));
      }
      return dirs;
    }
    if (dim == 3) {
      for (int j = 0; j < count; ++j) {
        const double z = 1.0 - 2.0 * (j + 0.5) / count;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double th = 2.0 * M_PI * frac((j + phase) * kGolden);
        dirs.push_back(make_vec({r * std::cos(th), r * std::sin(th), z}));
      }
      return dirs;
    }
    uint64_t state = 0x9e3779b97f4a7c15ull ^ (seed * 0x2545f4914f6cdd1dull);
    for (int j = 0; j < count; ++j) dirs.push_back(lcg_unit(dim, state));
    return dirs;
  }

  const Vec uh = u / un;
  const double half_angle = 2.0 * std::asin(std::min(delta, 2.0) / 2.0);
  if (dim == 1 || delta <= 0.0) {
    dirs.push_back(uh);
    return dirs;
  }
  dirs.push_back(uh);
  if (dim == 2) {
    for (int j = 1; j < count; ++j) {
      const double th = half_angle * (2.0 * frac((j + phase) * kGolden) - 1.0);
      const double c = std::cos(th), s = std::sin(th);
      dirs.push_back(make_vec({c * uh[0] - s * uh[1], s * uh[0] + c * uh[1]}));
    }
    return dirs;
  }
  if (dim == 3) {
    const double zmin = std::cos(half_angle);
    for (int j = 1; j < count; ++j) {
      const double z = 1.0 - frac((j + phase) * kPlastic1) * (1.0 - zmin);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double th = 2.0 * M_PI * frac((j + phase) * kPlastic2);
      Vec local = make_vec({r * std::cos(th), r * std::sin(th), z});
      dirs.push_back(unitize(rotate_from_axis(uh, local)));
    }
    return dirs;
  }
  uint64_t state = 0x2545f4914f6cdd1dull ^ (seed * 0x9e3779b97f4a7c15ull);
  while (static_cast<int>(dirs.size()) < count) {
    Vec v = unitize(uh + 0.5 * delta * lcg_unit(dim, state));
    if ((v - uh).norm() <= delta) dirs.push_back(v);
  }
  return dirs;
}

std::vector<Vec> sample_dir_neighborhood(const DirectionalNeighborhood& n,
                                         const SequenceSchedule& schedule) {
  if (!schedule.valid()) throw GeometryError("sample_dir_neighborhood: invalid schedule");
  std::vector<Vec> pts;
  const auto dirs = cap_directions(n.direction, n.delta, schedule.angular_count);
  for (double t : schedule.times()) {
    if (t > n.eps) continue;
    for (const Vec& d : dirs) {
      Vec p = n.center + t * d;
      if (n.contains(p)) pts.push_back(std::move(p));
    }
  }
  return pts;
}

// ---------------------------------------------------------------------------
// Gamma factors

int GammaFactor::dim() const {
  switch (kind) {
    case Kind::NonPositive:
    case Kind::Zero:
      return count;
    case Kind::Poly:
      return poly.dim;
    case Kind::Fixture:
      return fixture_tangent.dim;
  }
  return 0;
}

std::string GammaFactor::kind_name() const {
  switch (kind) {
    case Kind::NonPositive: return "NonPositive";
    case Kind::Zero: return "Zero";
    case Kind::Poly: return "Poly";
    case Kind::Fixture: return "Fixture";
  }
  return "?";
}

GammaFactor GammaFactor::non_positive(int k) {
  GammaFactor g;
  g.kind = Kind::NonPositive;
  g.count = k;
  return g;
}

GammaFactor GammaFactor::zero(int k) {
  GammaFactor g;
  g.kind = Kind::Zero;
  g.count = k;
  return g;
}

GammaFactor GammaFactor::poly_set(Polyhedron p) {
  GammaFactor g;
  g.kind = Kind::Poly;
  g.poly = std::move(p);
  return g;
}

GammaFactor GammaFactor::fixture(Polyhedron tangent, GeneratorCone normal) {
  if (tangent.dim != normal.dim)
    throw GeometryError("fixture: tangent/normal dimension mismatch");
  if (!tangent.is_cone()) throw GeometryError("fixture: tangent must be a cone");
  // The complementarity machinery needs every normal generator to make a
  // nonpositive inner product with every tangent direction.
  Polyhedron probe = intersect(tangent, Polyhedron::box(Vec::Constant(tangent.dim, -1.0),
                                                        Vec::Constant(tangent.dim, 1.0)));
  normal.normalize();
  for (const Vec& g : normal.generator_directions()) {
    if (probe.support(g) > 1e-7)
      throw GeometryError("fixture: normal generator not polar to tangent cone");
  }
  GammaFactor f;
  f.kind = Kind::Fixture;
  f.fixture_tangent = std::move(tangent);
  f.fixture_normal = std::move(normal);
  return f;
}

namespace {

bool factor_contains_with(const GammaFactor& g, const Vec& z, double ineq_tol) {
  const double eq_tol = 1e-9 * (1.0 + z.norm());
  switch (g.kind) {
    case GammaFactor::Kind::NonPositive:
      for (int i = 0; i < g.count; ++i)
        if (z[i] > ineq_tol) return false;
      return true;
    case GammaFactor::Kind::Zero:
      for (int i = 0; i < g.count; ++i)
        if (std::abs(z[i]) > eq_tol) return false;
      return true;
    case GammaFactor::Kind::Poly:
      for (const auto& r : g.poly.ineqs)
        if (r.a.dot(z) - r.b > ineq_tol) return false;
      for (const auto& r : g.poly.eqs)
        if (std::abs(r.a.dot(z) - r.b) > eq_tol) return false;
      return true;
    case GammaFactor::Kind::Fixture:
      return true;
  }
  return false;
}

}  // namespace

bool factor_contains(const GammaFactor& g, const Vec& z) {
  return factor_contains_with(g, z, 1e-9 * (1.0 + z.norm()));
}

GeneratorCone factor_directional_normal_cone(const GammaFactor& g, const Vec& z, const Vec& d) {
  const FactorCones fc = factor_cones(g, z);
  GeneratorCone n(g.dim());
  n.rays = fc.normal_rays;
  n.lineality = fc.normal_lin;
  n.normalize();
  if (d.norm() < kZeroDirTol) return n;
  if (!in_tangent_cone(fc.tangent, d)) return GeneratorCone::empty_cone(g.dim());
  return intersect_hyperplane(n, d);
}

bool factor_contains_strict(const GammaFactor& g, const Vec& z) {
  return factor_contains_with(g, z, 0.0);
}

FactorCones factor_cones(const GammaFactor& g, const Vec& z) {
  FactorCones out;
  const int d = g.dim();
  out.tangent = Polyhedron(d);
  const double tol = 1e-9 * (1.0 + z.norm());
  switch (g.kind) {
    case GammaFactor::Kind::NonPositive:
      for (int i = 0; i < d; ++i) {
        if (z[i] > tol) throw PointNotInSet("factor_cones: NonPositive violated");
        if (std::abs(z[i]) <= tol) {
          out.tangent.add_ineq(Vec::Unit(d, i), 0.0);
          out.normal_rays.push_back(Vec::Unit(d, i));
        }
      }
      return out;
    case GammaFactor::Kind::Zero:
      for (int i = 0; i < d; ++i) {
        if (std::abs(z[i]) > tol) throw PointNotInSet("factor_cones: Zero violated");
        out.tangent.add_eq(Vec::Unit(d, i), 0.0);
        out.normal_lin.push_back(Vec::Unit(d, i));
      }
      return out;
    case GammaFactor::Kind::Poly: {
      out.tangent = tangent_cone(g.poly, z);
      for (int i : g.poly.active_ineqs(z))
        out.normal_rays.push_back(unitize(g.poly.ineqs[static_cast<size_t>(i)].a));
      for (const auto& r : g.poly.eqs) out.normal_lin.push_back(unitize(r.a));
      return out;
    }
    case GammaFactor::Kind::Fixture:
      out.tangent = g.fixture_tangent;
      out.normal_rays = g.fixture_normal.rays;
      out.normal_lin = g.fixture_normal.lineality;
      return out;
  }
  return out;
}

}  // namespace dirsens::geometry
