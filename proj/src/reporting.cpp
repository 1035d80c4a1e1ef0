#include "dirsens/reporting.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>

namespace dirsens::report {

using nlohmann::ordered_json;

namespace {

ordered_json num(double v) {
  if (std::isfinite(v)) return v;
  if (v > 0) return "inf";
  if (v < 0) return "-inf";
  return "nan";
}

ordered_json vec_json(const Vec& v) {
  ordered_json a = ordered_json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

ordered_json poly_json(const geometry::Polyhedron& p) {
  ordered_json j;
  j["dim"] = p.dim;
  auto rows = [&](const std::vector<geometry::Halfspace>& list) {
    ordered_json out = ordered_json::array();
    for (const auto& r : list) {
      ordered_json row = ordered_json::array();
      for (int i = 0; i < r.a.size(); ++i) row.push_back(num(r.a[i]));
      row.push_back(num(r.b));
      out.push_back(row);
    }
    return out;
  };
  j["ineqs"] = rows(p.ineqs);
  j["eqs"] = rows(p.eqs);
  j["empty"] = p.is_empty();
  return j;
}

[[maybe_unused]] ordered_json cone_json(const geometry::GeneratorCone& c) {
  ordered_json j;
  j["dim"] = c.dim;
  j["empty"] = c.empty;
  ordered_json rays = ordered_json::array();
  for (const Vec& r : c.rays) rays.push_back(vec_json(r));
  ordered_json lin = ordered_json::array();
  for (const Vec& l : c.lineality) lin.push_back(vec_json(l));
  j["rays"] = rays;
  j["lineality"] = lin;
  return j;
}

ordered_json dini_json(const oracle::DiniEstimate& d) {
  ordered_json j;
  j["lower"] = num(d.lower);
  j["upper"] = num(d.upper);
  ordered_json s = ordered_json::array();
  for (double q : d.samples) s.push_back(num(q));
  j["samples"] = s;
  return j;
}

ordered_json estimate_json(const SetEstimate& e) {
  ordered_json j;
  ordered_json pts = ordered_json::array();
  for (size_t i = 0; i < e.points.size(); ++i) {
    ordered_json p;
    p["value"] = vec_json(e.points[i]);
    p["converged"] = i < e.points_converged.size() ? e.points_converged[i] : true;
    if (i < e.rates.size()) p["rate"] = num(e.rates[i]);
    pts.push_back(p);
  }
  ordered_json rays = ordered_json::array();
  for (size_t i = 0; i < e.rays.size(); ++i) {
    ordered_json p;
    p["value"] = vec_json(e.rays[i]);
    p["converged"] = i < e.rays_converged.size() ? e.rays_converged[i] : true;
    rays.push_back(p);
  }
  j["points"] = pts;
  j["rays"] = rays;
  return j;
}

ordered_json mset_json(const engine::MultiplierSet& m) {
  ordered_json j;
  j["alpha"] = m.alpha;
  j["mode"] = m.mode == engine::DirectionMode::DirU ? "DirU" : "Dir0Sphere";
  j["provenance"] = m.provenance;
  ordered_json pieces = ordered_json::array();
  for (const auto& piece : m.pieces) {
    ordered_json pj;
    pj["pattern"] = piece.pattern;
    pj["lambda_set"] = poly_json(piece.lambda_set);
    pj["zeta_set"] = poly_json(piece.zeta_set);
    if (piece.representative_v) pj["representative_v"] = vec_json(*piece.representative_v);
    pieces.push_back(pj);
  }
  j["pieces"] = pieces;
  return j;
}

ordered_json stability_json(const std::vector<solver::StabilityVerdict>& list) {
  ordered_json arr = ordered_json::array();
  for (const auto& v : list) {
    ordered_json j;
    j["property"] = solver::to_string(v.property);
    j["verdict"] = solver::to_string(v.verdict);
    j["witnesses"] = v.witnesses;
    if (v.kappa_estimate) j["kappa"] = num(*v.kappa_estimate);
    arr.push_back(j);
  }
  return arr;
}

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  size_t e = s.find_last_not_of(" \t\r\n");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

Vec parse_vector_words(const std::string& rest, const std::string& what) {
  std::istringstream in(rest);
  std::vector<double> vals;
  double v;
  while (in >> v) vals.push_back(v);
  if (vals.empty()) throw PlanError("expected numbers after '" + what + "'");
  Vec out(static_cast<Eigen::Index>(vals.size()));
  for (size_t i = 0; i < vals.size(); ++i) out[static_cast<Eigen::Index>(i)] = vals[i];
  return out;
}

}  // namespace

std::string to_string(Check c) {
  switch (c) {
    case Check::Cones: return "Cones";
    case Check::Dini: return "Dini";
    case Check::Subdiff: return "Subdiff";
    case Check::Thm3_1: return "Thm3_1";
    case Check::Thm3_2: return "Thm3_2";
    case Check::Thm3_3: return "Thm3_3";
    case Check::FOSCMS: return "FOSCMS";
    case Check::Abadie: return "Abadie";
    case Check::Danskin: return "Danskin";
    case Check::Stability: return "Stability";
  }
  return "?";
}

Check check_from_string(const std::string& s) {
  for (Check c : {Check::Cones, Check::Dini, Check::Subdiff, Check::Thm3_1, Check::Thm3_2,
                  Check::Thm3_3, Check::FOSCMS, Check::Abadie, Check::Danskin, Check::Stability})
    if (to_string(c) == s) return c;
  throw PlanError("unknown check '" + s + "'");
}

AnalysisPlan parse_plan(const std::string& text, const std::string& base_dir) {
  AnalysisPlan plan;
  std::istringstream in(text);
  std::string raw;
  bool have_point = false;
  while (std::getline(in, raw)) {
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    const std::string rest = trim(line.substr(key.size()));
    if (key == "plan") {
      plan.name = rest;
    } else if (key == "problem") {
      plan.problem_path = rest;
    } else if (key == "point") {
      plan.base_point = parse_vector_words(rest, "point");
      have_point = true;
    } else if (key == "dir") {
      plan.directions.push_back(parse_vector_words(rest, "dir"));
    } else if (key == "checks") {
      std::istringstream cs(rest);
      std::string item;
      while (std::getline(cs, item, ',')) plan.checks.push_back(check_from_string(trim(item)));
    } else if (key == "grid") {
      plan.solve_opts.grid_points = std::stoi(rest);
    } else if (key == "shells") {
      plan.schedule.shells = std::stoi(rest);
    } else if (key == "angles") {
      plan.schedule.angular_count = std::stoi(rest);
    } else if (key == "t0") {
      plan.schedule.t0 = std::stod(rest);
    } else if (key == "rho") {
      plan.schedule.rho = std::stod(rest);
    } else if (key == "delta") {
      plan.solve_opts.cap_delta = plan.oracle_opts.cap_delta = std::stod(rest);
    } else if (key == "conv_tol") {
      plan.oracle_opts.conv_tol = std::stod(rest);
    } else if (key == "gap_tol") {
      plan.oracle_opts.gap_tol = std::stod(rest);
    } else if (key == "incl_tol") {
      plan.engine_opts.incl_tol = std::stod(rest);
    } else if (key == "slab_pad") {
      plan.engine_opts.slab_pad = std::stod(rest);
    } else if (key == "cluster_tol") {
      plan.solve_opts.cluster_tol = std::stod(rest);
    } else if (key == "seed") {
      plan.seed = std::stoull(rest);
    } else {
      throw PlanError("unknown plan directive '" + key + "'");
    }
  }
  if (plan.problem_path.empty()) throw PlanError("plan lacks a 'problem' line");
  if (plan.directions.empty()) throw PlanError("plan lacks 'dir' lines");
  if (!have_point) throw PlanError("plan lacks a 'point' line");

  std::filesystem::path p(plan.problem_path);
  if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
  std::ifstream f(p);
  if (!f) throw IoError("cannot open problem file " + p.string());
  std::stringstream buf;
  buf << f.rdbuf();
  plan.problem = expr::parse_problem(buf.str());
  if (plan.base_point.size() != plan.problem.n)
    throw PlanError("base point dimension does not match the problem");
  for (const Vec& u : plan.directions)
    if (u.size() != plan.problem.n) throw PlanError("direction dimension does not match");

  if (plan.checks.empty())
    plan.checks = {Check::Stability, Check::Cones, Check::Dini,   Check::Subdiff,
                   Check::Thm3_1,    Check::Thm3_2, Check::Thm3_3, Check::FOSCMS,
                   Check::Abadie,    Check::Danskin};

  auto has = [&](Check c) {
    return std::find(plan.checks.begin(), plan.checks.end(), c) != plan.checks.end();
  };
  auto need = [&](Check c, Check prereq) {
    if (has(c) && !has(prereq))
      throw PlanError(to_string(c) + " requires " + to_string(prereq));
  };
  need(Check::Cones, Check::Dini);
  need(Check::Thm3_1, Check::Subdiff);
  need(Check::Thm3_1, Check::Stability);
  need(Check::Thm3_1, Check::Dini);
  need(Check::Thm3_2, Check::Subdiff);
  need(Check::Thm3_2, Check::Stability);
  need(Check::Thm3_2, Check::Dini);
  need(Check::Thm3_3, Check::Stability);
  need(Check::Thm3_3, Check::Dini);
  need(Check::Danskin, Check::Subdiff);
  return plan;
}

AnalysisPlan parse_plan_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open plan file " + path);
  std::stringstream buf;
  buf << f.rdbuf();
  return parse_plan(buf.str(), std::filesystem::path(path).parent_path().string());
}

namespace {

// Lazily computed per-direction state shared across checks.
struct DirectionState {
  const AnalysisPlan& plan;
  Vec u;
  oracle::ValueFunction V;

  std::optional<oracle::DiniEstimate> dini_ray, dini_u, dini_0;
  std::optional<std::vector<solver::StabilityVerdict>> stability;
  std::optional<SetEstimate> dirsols, limiting, singular;
  std::optional<oracle::LipschitzVerdict> lipschitz;
  std::optional<oracle::ContinuityVerdict> continuity;

  DirectionState(const AnalysisPlan& p, Vec dir)
      : plan(p), u(std::move(dir)), V(oracle::solver_value_function(p.problem, p.solve_opts)) {}

  const oracle::DiniEstimate& get_dini_ray() {
    if (!dini_ray)
      dini_ray = oracle::dini(V, plan.base_point, u, plan.schedule, plan.oracle_opts);
    return *dini_ray;
  }
  const oracle::DiniEstimate& get_dini_u() {
    if (!dini_u)
      dini_u = oracle::dini_cap(V, plan.base_point, u, plan.schedule, plan.oracle_opts);
    return *dini_u;
  }
  const oracle::DiniEstimate& get_dini_0() {
    if (!dini_0)
      dini_0 = oracle::dini_cap(V, plan.base_point, Vec(Vec::Zero(plan.problem.n)), plan.schedule,
                                plan.oracle_opts);
    return *dini_0;
  }
  const std::vector<solver::StabilityVerdict>& get_stability() {
    if (!stability)
      stability =
          solver::stability_diagnostics(plan.problem, plan.base_point, u, plan.schedule,
                                        plan.solve_opts);
    return *stability;
  }
  const SetEstimate& get_dirsols() {
    if (!dirsols)
      dirsols = solver::directional_solutions(plan.problem, plan.base_point, u, plan.schedule,
                                              plan.solve_opts);
    return *dirsols;
  }
  const SetEstimate& get_limiting() {
    if (!limiting)
      limiting = oracle::directional_limiting_subdiff(V, plan.base_point, u, plan.schedule,
                                                      plan.oracle_opts);
    return *limiting;
  }
  const SetEstimate& get_singular() {
    if (!singular)
      singular = oracle::directional_singular_subdiff(V, plan.base_point, u, plan.schedule,
                                                      plan.oracle_opts);
    return *singular;
  }
  const oracle::LipschitzVerdict& get_lipschitz() {
    if (!lipschitz)
      lipschitz = oracle::lipschitz_verdict(V, plan.base_point, u, plan.schedule, plan.oracle_opts);
    return *lipschitz;
  }
  const oracle::ContinuityVerdict& get_continuity() {
    if (!continuity)
      continuity =
          oracle::continuity_diagnostic(V, plan.base_point, u, plan.schedule, plan.oracle_opts);
    return *continuity;
  }

  engine::Variant select_variant() {
    const auto& st = get_stability();
    const engine::Variant order[] = {engine::Variant::InnerCalm,
                                     engine::Variant::InnerSemicontinuous,
                                     engine::Variant::CalmStar, engine::Variant::InfCompact};
    // Prefer prerequisites with positive empirical support, then anything not
    // empirically falsified.
    for (auto v : order) {
      const auto* s = solver::find_verdict(st, engine::variant_prerequisite(v));
      if (s && s->verdict == solver::Verdict::EmpiricallyHolds) return v;
    }
    for (auto v : order) {
      const auto* s = solver::find_verdict(st, engine::variant_prerequisite(v));
      if (!s || s->verdict != solver::Verdict::EmpiricallyFails) return v;
    }
    return engine::Variant::InfCompact;
  }
};

}  // namespace

AnalysisReport run_plan(const AnalysisPlan& plan_in) {
  AnalysisPlan plan = plan_in;
  plan.solve_opts.seed = plan.seed;
  plan.oracle_opts.seed = plan.seed;
  AnalysisReport rep;
  rep.name = plan.name;
  rep.dim_n = plan.problem.n;
  rep.payload["schema_version"] = 1;
  ordered_json plan_json;
  plan_json["name"] = plan.name;
  plan_json["problem"] = plan.problem_path;
  plan_json["problem_text"] = expr::print_problem(plan.problem);
  plan_json["base_point"] = vec_json(plan.base_point);
  ordered_json dirs = ordered_json::array();
  for (const Vec& u : plan.directions) dirs.push_back(vec_json(u));
  plan_json["directions"] = dirs;
  ordered_json checks = ordered_json::array();
  for (Check c : plan.checks) checks.push_back(to_string(c));
  plan_json["checks"] = checks;
  plan_json["schedule"] = {{"t0", plan.schedule.t0},
                           {"rho", plan.schedule.rho},
                           {"shells", plan.schedule.shells},
                           {"angular_count", plan.schedule.angular_count}};
  plan_json["tolerances"] = {{"grid_points", plan.solve_opts.grid_points},
                             {"cluster_tol", plan.solve_opts.cluster_tol},
                             {"conv_tol", plan.oracle_opts.conv_tol},
                             {"gap_tol", plan.oracle_opts.gap_tol},
                             {"incl_tol", plan.engine_opts.incl_tol},
                             {"slab_pad", plan.engine_opts.slab_pad},
                             {"cap_delta", plan.oracle_opts.cap_delta},
                             {"seed", plan.seed}};
  rep.payload["plan"] = plan_json;

  ordered_json records = ordered_json::array();
  const Check order[] = {Check::Stability, Check::Dini,   Check::Subdiff, Check::Cones,
                         Check::Thm3_1,    Check::Thm3_2, Check::Thm3_3,  Check::FOSCMS,
                         Check::Abadie,    Check::Danskin};

  for (size_t di = 0; di < plan.directions.size(); ++di) {
    DirectionState st(plan, plan.directions[di]);
    auto run_record = [&](Check c, const std::function<ordered_json()>& body) {
      ordered_json r;
      r["direction_index"] = di;
      r["direction"] = vec_json(st.u);
      r["check"] = to_string(c);
      const auto start = std::chrono::steady_clock::now();
      try {
        r["result"] = body();
      } catch (const std::exception& e) {
        r["error"] = e.what();
        ++rep.errors;
      }
      if (plan.include_timings) {
        const auto end = std::chrono::steady_clock::now();
        r["wall_ms"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(end - start).count();
      }
      records.push_back(std::move(r));
    };

    for (Check c : order) {
      if (std::find(plan.checks.begin(), plan.checks.end(), c) == plan.checks.end()) continue;
      switch (c) {
        case Check::Stability:
          run_record(c, [&] {
            ordered_json j;
            j["verdicts"] = stability_json(st.get_stability());
            return j;
          });
          break;
        case Check::Dini:
          run_record(c, [&] {
            ordered_json j;
            j["ray"] = dini_json(st.get_dini_ray());
            j["cap"] = dini_json(st.get_dini_u());
            j["cap_zero"] = dini_json(st.get_dini_0());
            return j;
          });
          break;
        case Check::Subdiff:
          run_record(c, [&] {
            ordered_json j;
            j["limiting"] = estimate_json(st.get_limiting());
            j["singular"] = estimate_json(st.get_singular());
            const auto& lip = st.get_lipschitz();
            j["lipschitz"] = {{"verdict", oracle::to_string(lip.kind)},
                              {"modulus", num(lip.modulus)},
                              {"witness", lip.witness}};
            const auto& cont = st.get_continuity();
            j["continuity"] = {{"verdict", oracle::to_string(cont.kind)},
                               {"witness", cont.witness}};
            try {
              auto hull = oracle::directional_clarke_subdiff(st.V, plan.base_point, st.u,
                                                             plan.schedule, plan.oracle_opts);
              ordered_json verts = ordered_json::array();
              for (const Vec& v : hull.vertices) verts.push_back(vec_json(v));
              j["clarke"] = {{"vertices", verts}, {"hull", poly_json(hull.hull)}};
            } catch (const oracle::NotDirectionallyLipschitz& e) {
              j["clarke"] = {{"error", e.what()}};
            }
            return j;
          });
          break;
        case Check::Cones:
          run_record(c, [&] {
            ordered_json arr = ordered_json::array();
            for (const Vec& y : st.get_dirsols().points) {
              ordered_json j;
              j["y"] = vec_json(y);
              // Constraint rows by index, with the active ones at (x_bar, y).
              {
                const Vec cval = plan.problem.constraint_values(plan.base_point, y);
                ordered_json factors = ordered_json::array();
                int off = 0;
                for (const auto& g : plan.problem.gamma) {
                  ordered_json fj;
                  fj["kind"] = g.kind_name();
                  std::vector<int> rows(static_cast<size_t>(g.dim()));
                  for (int i = 0; i < g.dim(); ++i) rows[static_cast<size_t>(i)] = off + i;
                  fj["rows"] = rows;
                  std::vector<int> active;
                  const double tol = 1e-9 * (1.0 + cval.norm());
                  for (int i = 0; i < g.dim(); ++i) {
                    const double z = cval[off + i];
                    const bool act = g.kind == geometry::GammaFactor::Kind::Zero
                                         ? true
                                         : std::abs(z) <= tol;
                    if (act && g.kind != geometry::GammaFactor::Kind::Poly &&
                        g.kind != geometry::GammaFactor::Kind::Fixture)
                      active.push_back(off + i);
                  }
                  fj["active_rows"] = active;
                  factors.push_back(fj);
                  off += g.dim();
                }
                j["factors"] = factors;
              }
              auto L = engine::linearization_cone(plan.problem, plan.base_point, y, st.u,
                                                  plan.engine_opts);
              j["linearization_cone"] = poly_json(L);
              auto cu = engine::critical_cone(plan.problem, plan.base_point, y, st.u,
                                              st.get_dini_u(), plan.engine_opts);
              j["critical_cone"] = poly_json(cu.cone);
              j["critical_slab"] = {{"lower", num(cu.dini_lower)}, {"upper", num(cu.dini_upper)}};
              const Vec zero = Vec::Zero(plan.problem.n);
              auto c0 = engine::critical_cone(plan.problem, plan.base_point, y, zero,
                                              st.get_dini_0(), plan.engine_opts);
              j["critical_cone_zero"] = poly_json(c0.cone);
              ordered_json msets = ordered_json::array();
              for (int alpha : {1, 0}) {
                msets.push_back(mset_json(engine::directional_multipliers(
                    plan.problem, plan.base_point, y, st.u, cu, alpha,
                    engine::DirectionMode::DirU, plan.engine_opts)));
                msets.push_back(mset_json(engine::directional_multipliers(
                    plan.problem, plan.base_point, y, zero, c0, alpha,
                    engine::DirectionMode::Dir0Sphere, plan.engine_opts)));
              }
              j["multiplier_sets"] = msets;
              arr.push_back(j);
            }
            ordered_json j;
            j["per_solution"] = arr;
            return j;
          });
          break;
        case Check::Thm3_1:
        case Check::Thm3_2:
          run_record(c, [&] {
            const auto which =
                c == Check::Thm3_1 ? engine::TheoremKind::Limiting : engine::TheoremKind::Singular;
            const auto variant = st.select_variant();
            const auto& lhs = which == engine::TheoremKind::Limiting ? st.get_limiting()
                                                                     : st.get_singular();
            auto verdict = engine::check_upper_estimate(
                plan.problem, plan.base_point, st.u, which, variant, lhs, st.get_dirsols(),
                st.get_dini_u(), st.get_dini_0(), st.get_stability(), plan.engine_opts);
            if (verdict.outcome == engine::InclusionOutcome::Violated) ++rep.violated;
            ordered_json j;
            j["theorem"] = engine::to_string(which);
            j["variant"] = engine::to_string(variant);
            j["outcome"] = engine::to_string(verdict.outcome);
            ordered_json d = ordered_json::array();
            for (double x : verdict.distances) d.push_back(num(x));
            j["distances"] = d;
            if (verdict.witness) j["witness"] = vec_json(*verdict.witness);
            j["note"] = verdict.note;
            return j;
          });
          break;
        case Check::Thm3_3:
          run_record(c, [&] {
            const auto variant = st.select_variant();
            auto cert = engine::check_lipschitz_sufficient(
                plan.problem, plan.base_point, st.u, variant, st.get_dirsols(), st.get_dini_u(),
                st.get_dini_0(), st.get_stability(), plan.engine_opts);
            ordered_json j;
            j["variant"] = engine::to_string(variant);
            j["certified"] = cert.certified;
            j["reason"] = cert.reason;
            const auto& lip = st.get_lipschitz();
            j["oracle_lipschitz"] = oracle::to_string(lip.kind);
            j["consistent"] =
                !(cert.certified && lip.kind == oracle::LipschitzKind::NotLipschitz);
            return j;
          });
          break;
        case Check::FOSCMS:
          run_record(c, [&] {
            ordered_json arr = ordered_json::array();
            for (const Vec& y : st.get_dirsols().points) {
              auto r = engine::foscms_check(plan.problem, plan.base_point, y, st.u,
                                            Vec(Vec::Zero(plan.problem.m)), plan.engine_opts);
              ordered_json j;
              j["y"] = vec_json(y);
              j["certified"] = r.certified;
              j["note"] = r.note;
              arr.push_back(j);
            }
            ordered_json j;
            j["per_solution"] = arr;
            return j;
          });
          break;
        case Check::Abadie:
          run_record(c, [&] {
            ordered_json arr = ordered_json::array();
            for (const Vec& y : st.get_dirsols().points) {
              auto r = engine::abadie_check(plan.problem, plan.base_point, y, plan.engine_opts);
              ordered_json j;
              j["y"] = vec_json(y);
              j["outcome"] = engine::to_string(r.outcome);
              if (r.witness) j["witness"] = vec_json(*r.witness);
              j["note"] = r.note;
              arr.push_back(j);
            }
            ordered_json j;
            j["per_solution"] = arr;
            return j;
          });
          break;
        case Check::Danskin:
          run_record(c, [&] {
            auto sets = engine::danskin_sets(plan.problem, plan.base_point, st.u,
                                             st.get_dirsols(), plan.engine_opts);
            ordered_json j;
            ordered_json grads = ordered_json::array();
            for (const Vec& g : sets.gradient_set) grads.push_back(vec_json(g));
            j["gradient_set"] = grads;
            j["hull"] = poly_json(sets.hull);
            // Prop 4.4(i)-style inclusion of the oracle estimate in the set
            // of partial gradients.
            ordered_json incl = ordered_json::array();
            bool all_within = true;
            for (const Vec& xi : st.get_limiting().points) {
              double best = std::numeric_limits<double>::infinity();
              for (const Vec& g : sets.gradient_set) best = std::min(best, (xi - g).norm());
              incl.push_back(num(best));
              if (!(best <= plan.engine_opts.incl_tol)) all_within = false;
            }
            j["limiting_to_gradient_distances"] = incl;
            j["inclusion_holds"] = all_within;
            return j;
          });
          break;
      }
    }

    // Shell history rows for CSV output come from the subdifferential sweep.
    if (st.limiting) {
      for (const auto& row : st.limiting->shell_history)
        rep.shells.emplace_back(static_cast<int>(di), row);
    }
  }
  rep.payload["records"] = records;
  rep.payload["violated"] = rep.violated;
  rep.payload["errors"] = rep.errors;
  return rep;
}

std::string summary_text(const AnalysisReport& rep) {
  std::ostringstream out;
  out << "plan: " << rep.name << "\n";
  for (const auto& r : rep.payload["records"]) {
    out << "  dir " << r["direction_index"] << " " << std::setw(9) << std::left
        << r["check"].get<std::string>() << " : ";
    if (r.contains("error")) {
      out << "ERROR " << r["error"].get<std::string>() << "\n";
      continue;
    }
    const auto& res = r["result"];
    if (res.contains("outcome"))
      out << res["outcome"].get<std::string>();
    else if (res.contains("certified"))
      out << (res["certified"].get<bool>() ? "Certified" : "NotCertified") << " ("
          << res["reason"].get<std::string>() << ")";
    else if (res.contains("lipschitz"))
      out << "lipschitz " << res["lipschitz"]["verdict"].get<std::string>();
    else if (res.contains("verdicts")) {
      for (const auto& v : res["verdicts"])
        out << v["property"].get<std::string>() << "=" << v["verdict"].get<std::string>() << " ";
    } else if (res.contains("inclusion_holds"))
      out << (res["inclusion_holds"].get<bool>() ? "inclusion holds" : "inclusion violated");
    else if (res.contains("ray"))
      out << "upper " << res["cap"]["upper"].dump() << " lower " << res["cap"]["lower"].dump();
    else
      out << "ok";
    out << "\n";
  }
  out << "violated: " << rep.violated << ", errors: " << rep.errors << "\n";
  return out.str();
}

std::vector<std::string> emit(const AnalysisReport& rep, const std::string& out_dir,
                              EmitFormat format) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir);
  std::vector<std::string> written;
  auto open = [&](const std::string& name) {
    const std::string path = (fs::path(out_dir) / name).string();
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    written.push_back(path);
    return f;
  };
  switch (format) {
    case EmitFormat::Json: {
      auto f = open(rep.name + ".json");
      f << rep.payload.dump(2) << "\n";
      break;
    }
    case EmitFormat::Csv: {
      auto f = open(rep.name + "_shells.csv");
      f << "direction_index,k,t";
      for (int i = 0; i < rep.dim_n; ++i) f << ",dir" << i;
      f << ",V";
      for (int i = 0; i < rep.dim_n; ++i) f << ",sub" << i;
      f << ",norm\n";
      auto sorted = rep.shells;
      std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second.k < b.second.k;
      });
      for (const auto& [di, row] : sorted) {
        f << di << "," << row.k << "," << row.t;
        for (int i = 0; i < rep.dim_n; ++i)
          f << "," << (i < row.direction.size() ? row.direction[i] : 0.0);
        f << "," << row.value;
        for (int i = 0; i < rep.dim_n; ++i)
          f << "," << (i < row.subgradient.size() ? row.subgradient[i] : 0.0);
        f << "," << row.norm << "\n";
      }
      auto v = open(rep.name + "_verdicts.csv");
      v << "direction_index,check,outcome,detail\n";
      for (const auto& r : rep.payload["records"]) {
        std::string outcome = "ok", detail;
        if (r.contains("error")) {
          outcome = "error";
          detail = r["error"].get<std::string>();
        } else {
          const auto& res = r["result"];
          if (res.contains("outcome")) outcome = res["outcome"].get<std::string>();
          else if (res.contains("certified"))
            outcome = res["certified"].get<bool>() ? "Certified" : "NotCertified";
          else if (res.contains("lipschitz"))
            outcome = res["lipschitz"]["verdict"].get<std::string>();
        }
        v << r["direction_index"] << "," << r["check"].get<std::string>() << "," << outcome << ","
          << "\"" << detail << "\"\n";
      }
      break;
    }
    case EmitFormat::Text: {
      auto f = open(rep.name + ".txt");
      f << summary_text(rep);
      break;
    }
  }
  return written;
}

}  // namespace dirsens::report
