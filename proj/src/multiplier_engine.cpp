#include "dirsens/multiplier_engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dirsens/lp.hpp"

namespace dirsens::engine {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kZeroDirTol = 1e-12;

struct FactorBlock {
  int offset = 0;
  int len = 0;
  geometry::FactorCones cones;
};

struct RayRef {
  int block;
  int local;
};

// Per-point engine state: gradients, factor cones and flattened normal-cone
// generators.
struct Context {
  int n, m, p;
  Vec x, y;
  Mat jac, jx, jy;
  Vec grad_f;
  Vec cval;
  std::vector<FactorBlock> blocks;
  std::vector<RayRef> rays;
  std::vector<RayRef> lins;

  const Vec& ray(const RayRef& r) const {
    return blocks[static_cast<size_t>(r.block)].cones.normal_rays[static_cast<size_t>(r.local)];
  }
  const Vec& lin(const RayRef& r) const {
    return blocks[static_cast<size_t>(r.block)].cones.normal_lin[static_cast<size_t>(r.local)];
  }
};

Context make_context(const expr::ParametricProblem& prob, const Vec& x, const Vec& y) {
  if (!prob.smooth_model())
    throw NonSmoothModel("exact multiplier computations require a smooth model");
  Context ctx;
  ctx.n = prob.n;
  ctx.m = prob.m;
  ctx.p = prob.p();
  ctx.x = x;
  ctx.y = y;
  ctx.jac = prob.constraint_jacobian(x, y);
  ctx.jx = ctx.jac.leftCols(prob.n);
  ctx.jy = ctx.jac.rightCols(prob.m);
  ctx.grad_f = prob.objective_gradient(x, y);
  ctx.cval = prob.constraint_values(x, y);
  int off = 0;
  for (size_t b = 0; b < prob.gamma.size(); ++b) {
    const auto& g = prob.gamma[b];
    FactorBlock blk;
    blk.offset = off;
    blk.len = g.dim();
    try {
      blk.cones = geometry::factor_cones(g, ctx.cval.segment(off, blk.len));
    } catch (const geometry::PointNotInSet& e) {
      throw PointNotFeasible(std::string("point infeasible: ") + e.what());
    }
    for (int i = 0; i < static_cast<int>(blk.cones.normal_rays.size()); ++i)
      ctx.rays.push_back({static_cast<int>(b), i});
    for (int i = 0; i < static_cast<int>(blk.cones.normal_lin.size()); ++i)
      ctx.lins.push_back({static_cast<int>(b), i});
    ctx.blocks.push_back(std::move(blk));
    off += blk.len;
  }
  return ctx;
}

// Rows of the factor tangent cones evaluated on d(v) = Jx u + Jy v, as a
// polyhedron in v.
geometry::Polyhedron linearization_rows(const Context& ctx, const Vec& u) {
  geometry::Polyhedron L(ctx.m);
  const Vec c = ctx.jx * u;
  for (const auto& blk : ctx.blocks) {
    const Mat jy_b = ctx.jy.middleRows(blk.offset, blk.len);
    const Vec c_b = c.segment(blk.offset, blk.len);
    for (const auto& row : blk.cones.tangent.ineqs)
      L.add_ineq(jy_b.transpose() * row.a, -row.a.dot(c_b));
    for (const auto& row : blk.cones.tangent.eqs)
      L.add_eq(jy_b.transpose() * row.a, -row.a.dot(c_b));
  }
  return L;
}

// Lambda-side polyhedron over [lambda(p), mu(R), nu(L)] for a complementarity
// pattern; rays outside the pattern have mu forced to zero.
geometry::Polyhedron lambda_system(const Context& ctx, int alpha,
                                   const std::vector<int>& pattern) {
  const int R = static_cast<int>(ctx.rays.size());
  const int L = static_cast<int>(ctx.lins.size());
  const int dim = ctx.p + R + L;
  geometry::Polyhedron sys(dim);

  // Linkage lambda_block = sum mu_i r_i + sum nu_j l_j.
  for (size_t b = 0; b < ctx.blocks.size(); ++b) {
    const auto& blk = ctx.blocks[b];
    for (int i = 0; i < blk.len; ++i) {
      Vec row = Vec::Zero(dim);
      row[blk.offset + i] = 1.0;
      for (int r = 0; r < R; ++r)
        if (ctx.rays[static_cast<size_t>(r)].block == static_cast<int>(b))
          row[ctx.p + r] = -ctx.ray(ctx.rays[static_cast<size_t>(r)])[i];
      for (int l = 0; l < L; ++l)
        if (ctx.lins[static_cast<size_t>(l)].block == static_cast<int>(b))
          row[ctx.p + R + l] = -ctx.lin(ctx.lins[static_cast<size_t>(l)])[i];
      sys.add_eq(row, 0.0);
    }
  }
  // Sign and pattern rows for the conic weights.
  for (int r = 0; r < R; ++r) {
    const bool in_pattern =
        std::find(pattern.begin(), pattern.end(), r) != pattern.end();
    Vec row = Vec::Zero(dim);
    row[ctx.p + r] = in_pattern ? -1.0 : 1.0;
    if (in_pattern)
      sys.add_ineq(row, 0.0);  // mu_r >= 0
    else
      sys.add_eq(row, 0.0);  // mu_r = 0
  }
  // Stationarity 0 = alpha * grad_y f + Jy^T lambda.
  const Vec gfy = ctx.grad_f.tail(ctx.m);
  for (int j = 0; j < ctx.m; ++j) {
    Vec row = Vec::Zero(dim);
    for (int i = 0; i < ctx.p; ++i) row[i] = ctx.jy(i, j);
    sys.add_eq(row, -static_cast<double>(alpha) * gfy[j]);
  }
  return sys;
}

std::vector<int> lambda_coords(const Context& ctx) {
  std::vector<int> keep(static_cast<size_t>(ctx.p));
  for (int i = 0; i < ctx.p; ++i) keep[static_cast<size_t>(i)] = i;
  return keep;
}

// Zeta projection: prepend zeta with zeta = alpha grad_x f + Jx^T lambda and
// project the joint system onto it.
geometry::Polyhedron zeta_projection(const Context& ctx, int alpha,
                                     const geometry::Polyhedron& lambda_sys) {
  const int dim = ctx.n + lambda_sys.dim;
  geometry::Polyhedron sys(dim);
  for (const auto& row : lambda_sys.ineqs) {
    Vec a = Vec::Zero(dim);
    a.tail(lambda_sys.dim) = row.a;
    sys.add_ineq(a, row.b);
  }
  for (const auto& row : lambda_sys.eqs) {
    Vec a = Vec::Zero(dim);
    a.tail(lambda_sys.dim) = row.a;
    sys.add_eq(a, row.b);
  }
  const Vec gfx = ctx.grad_f.head(ctx.n);
  for (int i = 0; i < ctx.n; ++i) {
    Vec a = Vec::Zero(dim);
    a[i] = 1.0;
    for (int j = 0; j < ctx.p; ++j) a[ctx.n + j] = -ctx.jx(j, i);
    sys.add_eq(a, static_cast<double>(alpha) * gfx[i]);
  }
  std::vector<int> keep(static_cast<size_t>(ctx.n));
  for (int i = 0; i < ctx.n; ++i) keep[static_cast<size_t>(i)] = i;
  return geometry::fm_project(sys, keep);
}

// v-side pattern rows: <r_i, Jx u + Jy v> = 0 for rays in the pattern.
geometry::Polyhedron v_system(const Context& ctx, const Vec& u,
                              const geometry::Polyhedron& critical,
                              const std::vector<int>& pattern) {
  geometry::Polyhedron sys = critical;
  const Vec c = ctx.jx * u;
  for (int r : pattern) {
    const RayRef& ref = ctx.rays[static_cast<size_t>(r)];
    const auto& blk = ctx.blocks[static_cast<size_t>(ref.block)];
    const Vec& ray = ctx.ray(ref);
    const Mat jy_b = ctx.jy.middleRows(blk.offset, blk.len);
    const Vec c_b = c.segment(blk.offset, blk.len);
    sys.add_eq(jy_b.transpose() * ray, -ray.dot(c_b));
  }
  return sys;
}

// Nonzero element of a polyhedral cone, if any (coordinate-wise LP probes).
std::optional<Vec> nonzero_cone_element(const geometry::Polyhedron& cone) {
  geometry::Polyhedron boxed = geometry::intersect(
      cone, geometry::Polyhedron::box(Vec::Constant(cone.dim, -1.0), Vec::Constant(cone.dim, 1.0)));
  for (int j = 0; j < cone.dim; ++j) {
    for (double s : {1.0, -1.0}) {
      Mat a = Mat(boxed.ineqs.size(), cone.dim);
      Vec b(boxed.ineqs.size());
      for (size_t i = 0; i < boxed.ineqs.size(); ++i) {
        a.row(static_cast<Eigen::Index>(i)) = boxed.ineqs[i].a;
        b[static_cast<Eigen::Index>(i)] = boxed.ineqs[i].b;
      }
      Mat e = Mat(boxed.eqs.size(), cone.dim);
      Vec f(boxed.eqs.size());
      for (size_t i = 0; i < boxed.eqs.size(); ++i) {
        e.row(static_cast<Eigen::Index>(i)) = boxed.eqs[i].a;
        f[static_cast<Eigen::Index>(i)] = boxed.eqs[i].b;
      }
      auto r = lp::maximize(a, b, e, f, Vec(s * Vec::Unit(cone.dim, j)));
      if (r.optimal() && r.objective > 1e-7) return r.x;
    }
  }
  return std::nullopt;
}

}  // namespace

// ---------------------------------------------------------------------------

geometry::Polyhedron linearization_cone(const expr::ParametricProblem& prob, const Vec& x_bar,
                                        const Vec& y, const Vec& u, const EngineOptions&) {
  Context ctx = make_context(prob, x_bar, y);
  return linearization_rows(ctx, u);
}

CriticalConeSpec critical_cone(const expr::ParametricProblem& prob, const Vec& x_bar, const Vec& y,
                               const Vec& u, const oracle::DiniEstimate& dini,
                               const EngineOptions& opts) {
  Context ctx = make_context(prob, x_bar, y);
  CriticalConeSpec spec;
  spec.base = linearization_rows(ctx, u);
  spec.direction_is_zero = u.norm() < kZeroDirTol;
  // At u = 0 the exact slab bounds are 0 or +-inf: finite cap estimates are
  // radial difference quotients whose Hadamard limit is 0 whenever they stay
  // bounded.
  spec.dini_lower = spec.direction_is_zero && std::isfinite(dini.lower) ? 0.0 : dini.lower;
  spec.dini_upper = spec.direction_is_zero && std::isfinite(dini.upper) ? 0.0 : dini.upper;

  spec.cone = spec.base;
  const Vec gfx = ctx.grad_f.head(ctx.n);
  const Vec gfy = ctx.grad_f.tail(ctx.m);
  const double shift = gfx.dot(u);
  if (spec.direction_is_zero) {
    if (std::isfinite(spec.dini_upper) && std::isfinite(spec.dini_lower))
      spec.cone.add_eq(gfy, 0.0);
    else if (std::isfinite(spec.dini_upper))
      spec.cone.add_ineq(gfy, 0.0);
    else if (std::isfinite(spec.dini_lower))
      spec.cone.add_ineq(-gfy, 0.0);
  } else {
    if (std::isfinite(spec.dini_upper))
      spec.cone.add_ineq(gfy, spec.dini_upper + opts.slab_pad - shift);
    if (std::isfinite(spec.dini_lower))
      spec.cone.add_ineq(-gfy, -(spec.dini_lower - opts.slab_pad) + shift);
  }
  return spec;
}

// ---------------------------------------------------------------------------

double MultiplierSet::zeta_distance(const Vec& zeta) const {
  double best = kInf;
  for (const auto& piece : pieces)
    best = std::min(best, polyhedron_distance(piece.zeta_set, zeta));
  return best;
}

bool MultiplierSet::zeta_union_is_zero(double tol) const {
  for (const auto& piece : pieces) {
    if (auto nz = nonzero_cone_element(piece.zeta_set); nz && nz->lpNorm<Eigen::Infinity>() > tol)
      return false;
    // The probe above covers cones; a safety net for non-conic sets.
    if (polyhedron_distance(piece.zeta_set, Vec::Zero(piece.zeta_set.dim)) > tol) return false;
  }
  return true;
}

MultiplierSet classical_multipliers(const expr::ParametricProblem& prob, const Vec& x_bar,
                                    const Vec& y, int alpha, const EngineOptions& opts) {
  Context ctx = make_context(prob, x_bar, y);
  if (static_cast<int>(ctx.rays.size()) > opts.pattern_cap)
    throw PatternOverflow("active normal-cone rays exceed the pattern cap");
  MultiplierSet out;
  out.alpha = alpha;
  out.mode = DirectionMode::DirU;
  out.provenance = alpha == 1 ? "classical multipliers Sigma" : "singular multipliers Sigma0";
  for (int mask = 0; mask < (1 << ctx.rays.size()); ++mask) {
    std::vector<int> pattern;
    for (size_t i = 0; i < ctx.rays.size(); ++i)
      if (mask & (1 << i)) pattern.push_back(static_cast<int>(i));
    geometry::Polyhedron sys = lambda_system(ctx, alpha, pattern);
    geometry::Polyhedron lam = geometry::fm_project(sys, lambda_coords(ctx));
    if (lam.is_empty()) continue;
    MultiplierPiece piece;
    piece.pattern = pattern;
    piece.lambda_set = lam.canonicalized();
    piece.zeta_set = zeta_projection(ctx, alpha, sys).canonicalized();
    out.pieces.push_back(std::move(piece));
  }
  return out;
}

MultiplierSet directional_multipliers(const expr::ParametricProblem& prob, const Vec& x_bar,
                                      const Vec& y, const Vec& u, const CriticalConeSpec& cone,
                                      int alpha, DirectionMode mode, const EngineOptions& opts) {
  Context ctx = make_context(prob, x_bar, y);
  if (static_cast<int>(ctx.rays.size()) > opts.pattern_cap)
    throw PatternOverflow("active normal-cone rays exceed the pattern cap");
  const Vec u_eff = mode == DirectionMode::Dir0Sphere ? Vec(Vec::Zero(ctx.n)) : u;

  MultiplierSet out;
  out.alpha = alpha;
  out.mode = mode;
  out.provenance = mode == DirectionMode::DirU ? "M_u (direction u)" : "M_0 (sphere mode)";
  for (int mask = 0; mask < (1 << ctx.rays.size()); ++mask) {
    std::vector<int> pattern;
    for (size_t i = 0; i < ctx.rays.size(); ++i)
      if (mask & (1 << i)) pattern.push_back(static_cast<int>(i));

    geometry::Polyhedron vsys = v_system(ctx, u_eff, cone.cone, pattern);
    std::optional<Vec> rep;
    if (mode == DirectionMode::Dir0Sphere) {
      auto nz = nonzero_cone_element(vsys);
      if (!nz) continue;  // critical cone piece meets the sphere nowhere
      rep = unitize(*nz);
    } else {
      auto fp = vsys.representative_point();
      if (!fp) continue;
      rep = *fp;
    }

    geometry::Polyhedron sys = lambda_system(ctx, alpha, pattern);
    geometry::Polyhedron lam = geometry::fm_project(sys, lambda_coords(ctx));
    if (lam.is_empty()) continue;
    MultiplierPiece piece;
    piece.pattern = pattern;
    piece.lambda_set = lam.canonicalized();
    piece.zeta_set = zeta_projection(ctx, alpha, sys).canonicalized();
    piece.representative_v = rep;
    out.pieces.push_back(std::move(piece));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Theorem checkers

std::string to_string(TheoremKind k) {
  return k == TheoremKind::Limiting ? "limiting-subdifferential upper estimate"
                                    : "singular-subdifferential upper estimate";
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::InfCompact: return "restricted inf-compactness (i)";
    case Variant::CalmStar: return "inner calmness* (ii)";
    case Variant::InnerSemicontinuous: return "inner semicontinuity (iii)";
    case Variant::InnerCalm: return "inner calmness (iv)";
  }
  return "?";
}

std::string to_string(InclusionOutcome o) {
  switch (o) {
    case InclusionOutcome::Holds: return "Holds";
    case InclusionOutcome::Violated: return "Violated";
    case InclusionOutcome::Inconclusive: return "Inconclusive";
  }
  return "?";
}

std::string to_string(AbadieOutcome o) {
  switch (o) {
    case AbadieOutcome::Equal: return "Equal";
    case AbadieOutcome::StrictInclusion: return "StrictInclusion";
    case AbadieOutcome::Inconclusive: return "Inconclusive";
  }
  return "?";
}

bool variant_drops_sphere_term(Variant v) {
  return v == Variant::CalmStar || v == Variant::InnerCalm;
}

solver::StabilityProperty variant_prerequisite(Variant v) {
  switch (v) {
    case Variant::InfCompact: return solver::StabilityProperty::RestrictedInfCompact;
    case Variant::CalmStar: return solver::StabilityProperty::InnerCalmStar;
    case Variant::InnerSemicontinuous: return solver::StabilityProperty::InnerSemicontinuous;
    case Variant::InnerCalm: return solver::StabilityProperty::InnerCalm;
  }
  return solver::StabilityProperty::RestrictedInfCompact;
}

namespace {

void require_prereq(const std::vector<solver::StabilityVerdict>& stability, Variant variant) {
  const auto* v = solver::find_verdict(stability, variant_prerequisite(variant));
  if (v && v->verdict == solver::Verdict::EmpiricallyFails)
    throw StabilityPrereqFailed("stability prerequisite " +
                                solver::to_string(variant_prerequisite(variant)) +
                                " empirically fails");
}

// Union of zeta pieces of the variant-appropriate multiplier sets at y.
std::vector<MultiplierSet> variant_multiplier_sets(const expr::ParametricProblem& prob,
                                                   const Vec& x_bar, const Vec& y, const Vec& u,
                                                   int alpha, Variant variant,
                                                   const oracle::DiniEstimate& dini_u,
                                                   const oracle::DiniEstimate& dini_0,
                                                   const EngineOptions& opts) {
  std::vector<MultiplierSet> sets;
  const CriticalConeSpec cu = critical_cone(prob, x_bar, y, u, dini_u, opts);
  sets.push_back(directional_multipliers(prob, x_bar, y, u, cu, alpha, DirectionMode::DirU, opts));
  if (!variant_drops_sphere_term(variant)) {
    const Vec zero = Vec::Zero(x_bar.size());
    const CriticalConeSpec c0 = critical_cone(prob, x_bar, y, zero, dini_0, opts);
    sets.push_back(
        directional_multipliers(prob, x_bar, y, zero, c0, alpha, DirectionMode::Dir0Sphere, opts));
  }
  return sets;
}

}  // namespace

InclusionVerdict check_upper_estimate(const expr::ParametricProblem& prob, const Vec& x_bar,
                                      const Vec& u, TheoremKind which, Variant variant,
                                      const SetEstimate& lhs, const SetEstimate& dir_solutions,
                                      const oracle::DiniEstimate& dini_u,
                                      const oracle::DiniEstimate& dini_0,
                                      const std::vector<solver::StabilityVerdict>& stability,
                                      const EngineOptions& opts) {
  require_prereq(stability, variant);
  InclusionVerdict out;
  out.theorem = which;
  out.variant = variant;

  const int alpha = which == TheoremKind::Limiting ? 1 : 0;
  std::vector<const geometry::Polyhedron*> pieces;
  std::vector<MultiplierSet> sets;
  for (const Vec& y : dir_solutions.points) {
    auto ms = variant_multiplier_sets(prob, x_bar, y, u, alpha, variant, dini_u, dini_0, opts);
    for (auto& s : ms) sets.push_back(std::move(s));
  }
  for (const auto& s : sets)
    for (const auto& piece : s.pieces) pieces.push_back(&piece.zeta_set);

  const auto& elements = which == TheoremKind::Limiting ? lhs.points : lhs.rays;
  const auto& flags = which == TheoremKind::Limiting ? lhs.points_converged : lhs.rays_converged;
  if (elements.empty()) {
    out.outcome = InclusionOutcome::Holds;
    out.note = "vacuous: empty oracle estimate on the left-hand side";
    return out;
  }

  bool any_unconverged = false;
  for (size_t i = 0; i < elements.size(); ++i) {
    double dist = kInf;
    for (const auto* piece : pieces)
      dist = std::min(dist, polyhedron_distance(*piece, elements[i]));
    out.distances.push_back(dist);
    const bool converged = i < flags.size() ? flags[i] : true;
    if (dist > opts.incl_tol) {
      if (converged) {
        out.outcome = InclusionOutcome::Violated;
        out.witness = elements[i];
        std::ostringstream note;
        note << "element at distance " << dist << " from the multiplier union";
        out.note = note.str();
        return out;
      }
      any_unconverged = true;
    } else if (!converged) {
      any_unconverged = true;
    }
  }
  out.outcome = any_unconverged ? InclusionOutcome::Inconclusive : InclusionOutcome::Holds;
  out.note = any_unconverged ? "oracle estimate not fully converged"
                             : "rhs union over " + std::to_string(dir_solutions.points.size()) +
                                   " estimated directional solutions";
  return out;
}

LipschitzCertificate check_lipschitz_sufficient(
    const expr::ParametricProblem& prob, const Vec& x_bar, const Vec& u, Variant variant,
    const SetEstimate& dir_solutions, const oracle::DiniEstimate& dini_u,
    const oracle::DiniEstimate& dini_0, const std::vector<solver::StabilityVerdict>& stability,
    const EngineOptions& opts) {
  LipschitzCertificate out;
  const auto* prereq = solver::find_verdict(stability, variant_prerequisite(variant));
  if (prereq && prereq->verdict == solver::Verdict::EmpiricallyFails) {
    out.reason = "stability prerequisite fails: " +
                 solver::to_string(variant_prerequisite(variant));
    return out;
  }
  if (dir_solutions.points.empty()) {
    out.reason = "no directional solution estimate";
    return out;
  }
  for (const Vec& y : dir_solutions.points) {
    auto sets = variant_multiplier_sets(prob, x_bar, y, u, 0, variant, dini_u, dini_0, opts);
    for (const auto& s : sets) {
      if (!s.zeta_union_is_zero()) {
        std::ostringstream reason;
        reason << "singular multiplier set at y = [";
        for (int j = 0; j < y.size(); ++j) reason << (j ? ", " : "") << y[j];
        reason << "] has a nonzero zeta element (" << s.provenance << ")";
        out.reason = reason.str();
        return out;
      }
    }
  }
  out.certified = true;
  out.reason = "all singular-multiplier zeta projections reduce to {0}";
  return out;
}

FoscmsResult foscms_check(const expr::ParametricProblem& prob, const Vec& x_bar, const Vec& y,
                          const Vec& u, const Vec& v_probe, const EngineOptions&) {
  Context ctx = make_context(prob, x_bar, y);
  Vec joint_dir(ctx.n + ctx.m);
  joint_dir.head(ctx.n) = u;
  joint_dir.tail(ctx.m) = v_probe;
  const Vec w = ctx.jac * joint_dir;

  FoscmsResult out;
  for (const auto& blk : ctx.blocks) {
    if (!geometry::in_tangent_cone(blk.cones.tangent, w.segment(blk.offset, blk.len))) {
      out.certified = true;
      out.note = "vacuous: grad P (u,v) leaves the tangent cone";
      return out;
    }
  }

  // K = {lambda in N_Gamma(P;w) | grad P^T lambda = 0}; certified iff K = {0}.
  const int R = static_cast<int>(ctx.rays.size());
  const int L = static_cast<int>(ctx.lins.size());
  const int dim = ctx.p + R + L;
  geometry::Polyhedron sys(dim);
  for (size_t b = 0; b < ctx.blocks.size(); ++b) {
    const auto& blk = ctx.blocks[b];
    for (int i = 0; i < blk.len; ++i) {
      Vec row = Vec::Zero(dim);
      row[blk.offset + i] = 1.0;
      for (int r = 0; r < R; ++r)
        if (ctx.rays[static_cast<size_t>(r)].block == static_cast<int>(b))
          row[ctx.p + r] = -ctx.ray(ctx.rays[static_cast<size_t>(r)])[i];
      for (int l = 0; l < L; ++l)
        if (ctx.lins[static_cast<size_t>(l)].block == static_cast<int>(b))
          row[ctx.p + R + l] = -ctx.lin(ctx.lins[static_cast<size_t>(l)])[i];
      sys.add_eq(row, 0.0);
    }
  }
  for (int r = 0; r < R; ++r) {
    const RayRef& ref = ctx.rays[static_cast<size_t>(r)];
    const auto& blk = ctx.blocks[static_cast<size_t>(ref.block)];
    const double s = ctx.ray(ref).dot(w.segment(blk.offset, blk.len));
    Vec row = Vec::Zero(dim);
    row[ctx.p + r] = s < -1e-9 * (1.0 + w.norm()) ? 1.0 : -1.0;
    if (s < -1e-9 * (1.0 + w.norm()))
      sys.add_eq(row, 0.0);  // orthogonality forces mu_r = 0
    else
      sys.add_ineq(row, 0.0);  // mu_r >= 0
  }
  // Joint-gradient annihilation grad P^T lambda = 0 over both x and y parts.
  for (int j = 0; j < ctx.n + ctx.m; ++j) {
    Vec row = Vec::Zero(dim);
    for (int i = 0; i < ctx.p; ++i) row[i] = ctx.jac(i, j);
    sys.add_eq(row, 0.0);
  }
  auto lam = geometry::fm_project(sys, lambda_coords(ctx));
  auto nz = nonzero_cone_element(lam);
  out.certified = !nz.has_value();
  out.note = out.certified ? "only the zero multiplier annihilates the Jacobian"
                           : "nonzero annihilating multiplier found";
  return out;
}

namespace {

double infeasibility(const expr::ParametricProblem& prob, const Vec& x, const Vec& y) {
  double viol = 0.0;
  Vec vals;
  try {
    vals = prob.constraint_values(x, y);
  } catch (const expr::EvalDomain&) {
    return kInf;
  }
  int off = 0;
  for (const auto& g : prob.gamma) {
    const Vec z = vals.segment(off, g.dim());
    switch (g.kind) {
      case geometry::GammaFactor::Kind::NonPositive:
        for (int i = 0; i < g.dim(); ++i) viol += std::max(0.0, z[i]);
        break;
      case geometry::GammaFactor::Kind::Zero:
        for (int i = 0; i < g.dim(); ++i) viol += std::abs(z[i]);
        break;
      case geometry::GammaFactor::Kind::Poly:
        for (const auto& row : g.poly.ineqs) viol += std::max(0.0, row.a.dot(z) - row.b);
        for (const auto& row : g.poly.eqs) viol += std::abs(row.a.dot(z) - row.b);
        break;
      case geometry::GammaFactor::Kind::Fixture:
        break;  // no membership predicate; handled by the caller
    }
    off += g.dim();
  }
  return viol;
}

// Nearest feasible joint point to `target` by coordinate descent on the
// constraint violation.
std::optional<Vec> project_feasible(const expr::ParametricProblem& prob, const Vec& target,
                                    double step0) {
  Vec z = target;
  double v = infeasibility(prob, z.head(prob.n), z.tail(prob.m));
  double step = step0;
  int iters = 0;
  while (step > 1e-14 * (1.0 + step0) && iters < 20000) {
    bool improved = false;
    for (int j = 0; j < z.size(); ++j) {
      for (double sgn : {1.0, -1.0}) {
        for (;;) {
          Vec cand = z;
          cand[j] += sgn * step;
          ++iters;
          const double vc = infeasibility(prob, cand.head(prob.n), cand.tail(prob.m));
          if (!(vc < v - 1e-18)) break;
          z = cand;
          v = vc;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  if (v > 1e-9) return std::nullopt;
  return z;
}

}  // namespace

AbadieResult abadie_check(const expr::ParametricProblem& prob, const Vec& x_bar, const Vec& y,
                          const EngineOptions&) {
  Context ctx = make_context(prob, x_bar, y);
  AbadieResult out;
  for (const auto& g : prob.gamma) {
    if (g.kind == geometry::GammaFactor::Kind::Fixture) {
      out.note = "fixture factors carry no membership predicate";
      return out;
    }
  }

  // Joint linearization cone rows over (u, v).
  geometry::Polyhedron joint(ctx.n + ctx.m);
  for (const auto& blk : ctx.blocks) {
    const Mat j_b = ctx.jac.middleRows(blk.offset, blk.len);
    for (const auto& row : blk.cones.tangent.ineqs)
      joint.add_ineq(j_b.transpose() * row.a, 0.0);
    for (const auto& row : blk.cones.tangent.eqs) joint.add_eq(j_b.transpose() * row.a, 0.0);
  }
  geometry::GeneratorCone gens = geometry::cone_generators(joint, ctx.n + ctx.m + 1);

  Vec base(ctx.n + ctx.m);
  base.head(ctx.n) = x_bar;
  base.tail(ctx.m) = y;
  const double arc_tol = 5e-2;

  std::vector<double> shells;
  for (int k = 2; k <= 7; ++k) shells.push_back(std::pow(10.0, -k / 1.0));

  for (const Vec& g : gens.generator_directions()) {
    int realized = 0, failed = 0;
    for (size_t si = shells.size() - 3; si < shells.size(); ++si) {
      const double t = shells[si];
      const Vec target = base + t * g;
      auto z = project_feasible(prob, target, t / 8.0);
      if (!z) { ++failed; continue; }
      const double dist = (*z - target).norm();
      if (dist <= arc_tol * t)
        ++realized;
      else if (dist >= 0.25 * t)
        ++failed;
    }
    if (realized < 3) {
      if (failed == 3) {
        out.outcome = AbadieOutcome::StrictInclusion;
        out.witness = g;
        return out;
      }
      out.outcome = AbadieOutcome::Inconclusive;
      out.note = "feasible-arc search ambiguous along a linearization direction";
      return out;
    }
  }

  // Converse containment: sampled feasible directions must satisfy the
  // linearization rows (they do in exact arithmetic; this guards numerics).
  const auto dirs = geometry::cap_directions(Vec::Zero(ctx.n + ctx.m), 2.0, 24);
  for (const Vec& w : dirs) {
    const double t = 1e-5;
    const Vec z = base + t * w;
    if (infeasibility(prob, z.head(ctx.n), z.tail(ctx.m)) > 1e-12) continue;
    bool inside = true;
    for (const auto& row : joint.ineqs)
      if (row.a.dot(w) > 10 * arc_tol * (1.0 + row.a.norm())) inside = false;
    for (const auto& row : joint.eqs)
      if (std::abs(row.a.dot(w)) > 10 * arc_tol * (1.0 + row.a.norm())) inside = false;
    if (!inside) {
      out.outcome = AbadieOutcome::Inconclusive;
      out.note = "sampled feasible direction escapes the linearization cone";
      return out;
    }
  }
  out.outcome = AbadieOutcome::Equal;
  return out;
}

DanskinSets danskin_sets(const expr::ParametricProblem& prob, const Vec& x_bar, const Vec&,
                         const SetEstimate& dir_solutions, const EngineOptions&) {
  for (const auto& c : prob.constraints)
    if (c.uses_var_in(0, prob.n))
      throw ConstraintDependsOnParameter("feasible set depends on the parameter");
  DanskinSets out;
  std::vector<int> xs(static_cast<size_t>(prob.n));
  for (int i = 0; i < prob.n; ++i) xs[static_cast<size_t>(i)] = i;
  for (const Vec& y : dir_solutions.points) {
    Vec g;
    try {
      g = prob.objective.grad(prob.joint(x_bar, y), xs);
    } catch (const expr::NonSmoothPoint&) {
      throw NonSmoothModel("grad_x f has an active kink at a solution");
    }
    bool dup = false;
    for (const Vec& h : out.gradient_set)
      if ((h - g).norm() <= 1e-9 * (1.0 + g.norm())) { dup = true; break; }
    if (!dup) out.gradient_set.push_back(g);
  }
  std::sort(out.gradient_set.begin(), out.gradient_set.end(),
            [](const Vec& a, const Vec& b) { return lex_less(a, b); });
  out.hull = out.gradient_set.empty()
                 ? geometry::Polyhedron::empty_set(prob.n)
                 : geometry::v_to_h(out.gradient_set, geometry::GeneratorCone::zero(prob.n));
  return out;
}

double polyhedron_distance(const geometry::Polyhedron& p, const Vec& point) {
  // min s subject to z in p, |z - point|_inf <= s, via LP over (z, s).
  const int d = p.dim;
  geometry::Polyhedron aug(d + 1);
  for (const auto& row : p.ineqs) {
    Vec a = Vec::Zero(d + 1);
    a.head(d) = row.a;
    aug.add_ineq(a, row.b);
  }
  for (const auto& row : p.eqs) {
    Vec a = Vec::Zero(d + 1);
    a.head(d) = row.a;
    aug.add_eq(a, row.b);
  }
  for (int i = 0; i < d; ++i) {
    Vec a = Vec::Zero(d + 1);
    a[i] = 1.0;
    a[d] = -1.0;
    aug.add_ineq(a, point[i]);
    a[i] = -1.0;
    aug.add_ineq(a, -point[i]);
  }
  Mat A(aug.ineqs.size(), d + 1);
  Vec b(aug.ineqs.size());
  for (size_t i = 0; i < aug.ineqs.size(); ++i) {
    A.row(static_cast<Eigen::Index>(i)) = aug.ineqs[i].a;
    b[static_cast<Eigen::Index>(i)] = aug.ineqs[i].b;
  }
  Mat E(aug.eqs.size(), d + 1);
  Vec f(aug.eqs.size());
  for (size_t i = 0; i < aug.eqs.size(); ++i) {
    E.row(static_cast<Eigen::Index>(i)) = aug.eqs[i].a;
    f[static_cast<Eigen::Index>(i)] = aug.eqs[i].b;
  }
  auto r = lp::solve(A, b, E, f, Vec(Vec::Unit(d + 1, d)));
  if (!r.optimal()) return kInf;
  return std::max(0.0, r.objective);
}

}  // namespace dirsens::engine
