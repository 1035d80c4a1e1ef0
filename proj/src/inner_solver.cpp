#include "dirsens/inner_solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dirsens/geometry.hpp"

namespace dirsens::solver {

namespace {

constexpr double kImproveEps = 1e-16;

double safe_objective(const expr::ParametricProblem& prob, const Vec& x, const Vec& y) {
  try {
    return prob.objective.eval(prob.joint(x, y));
  } catch (const expr::EvalDomain&) {
    return std::numeric_limits<double>::infinity();
  }
}

bool safe_feasible(const expr::ParametricProblem& prob, const Vec& x, const Vec& y) {
  try {
    const Vec v = prob.constraint_values(x, y);
    int off = 0;
    for (const auto& g : prob.gamma) {
      if (!geometry::factor_contains_strict(g, v.segment(off, g.dim()))) return false;
      off += g.dim();
    }
    return true;
  } catch (const expr::EvalDomain&) {
    return false;
  }
}

// Projected coordinate descent with shrinking steps; y must start feasible.
long refine(const expr::ParametricProblem& prob, const Vec& x, Vec& y, double& fy,
            double step0, const Vec& lo, const Vec& hi) {
  const double width = (hi - lo).maxCoeff();
  const double step_min = 1e-13 * std::max(1.0, width);
  double step = step0;
  long iters = 0;
  while (step > step_min && iters < 200000) {
    bool improved = false;
    for (int j = 0; j < y.size(); ++j) {
      for (double sgn : {1.0, -1.0}) {
        for (;;) {
          Vec cand = y;
          cand[j] = std::clamp(cand[j] + sgn * step, lo[j], hi[j]);
          ++iters;
          if (cand[j] == y[j]) break;
          if (!safe_feasible(prob, x, cand)) break;
          const double fc = safe_objective(prob, x, cand);
          if (!(fc < fy - kImproveEps * (1.0 + std::abs(fy)))) break;
          y = cand;
          fy = fc;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return iters;
}

std::vector<Vec> cluster_points(std::vector<std::pair<double, Vec>> scored, double radius,
                                size_t cap) {
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return lex_less(a.second, b.second);
  });
  std::vector<Vec> reps;
  for (const auto& [val, y] : scored) {
    bool close = false;
    for (const Vec& r : reps)
      if ((r - y).norm() <= radius) { close = true; break; }
    if (!close) {
      reps.push_back(y);
      if (reps.size() >= cap) break;
    }
  }
  std::sort(reps.begin(), reps.end(), [](const Vec& a, const Vec& b) { return lex_less(a, b); });
  return reps;
}

// Least-squares slope of log(d) against log(t) over positive entries.
std::optional<double> loglog_slope(const std::vector<double>& t, const std::vector<double>& d) {
  std::vector<double> xs, ys;
  for (size_t i = 0; i < t.size(); ++i)
    if (d[i] > 1e-14 && t[i] > 0) {
      xs.push_back(std::log(t[i]));
      ys.push_back(std::log(d[i]));
    }
  if (xs.size() < 3) return std::nullopt;
  double mx = 0, my = 0;
  for (size_t i = 0; i < xs.size(); ++i) { mx += xs[i]; my += ys[i]; }
  mx /= static_cast<double>(xs.size());
  my /= static_cast<double>(xs.size());
  double sxx = 0, sxy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx <= 0) return std::nullopt;
  return sxy / sxx;
}

}  // namespace

SolveResult solve_value(const expr::ParametricProblem& prob, const Vec& x,
                        const SolveOptions& opts) {
  prob.validate();
  if (prob.m > 3) throw SolverError("solve_value: decision dimension above 3");
  if (prob.m == 0) throw SolverError("solve_value: problem has no decision variables");
  const int n_pts = std::max(2, opts.grid_points);
  const Vec lo = prob.y_lo, hi = prob.y_hi;
  Vec step(prob.m);
  for (int j = 0; j < prob.m; ++j) step[j] = (hi[j] - lo[j]) / (n_pts - 1);

  SolveResult out;
  out.certificate.grid_points = n_pts;

  // Grid pass, keeping near-best feasible cells as refinement seeds.
  std::vector<std::pair<double, Vec>> seeds;
  double best = std::numeric_limits<double>::infinity();
  auto margin = [&] { return opts.cluster_tol * (1.0 + std::abs(best)); };
  std::vector<int> idx(static_cast<size_t>(prob.m), 0);
  Vec y(prob.m);
  for (;;) {
    for (int j = 0; j < prob.m; ++j) y[j] = lo[j] + step[j] * idx[static_cast<size_t>(j)];
    if (safe_feasible(prob, x, y)) {
      const double f = safe_objective(prob, x, y);
      if (std::isfinite(f) && f <= best + margin()) {
        if (f < best) best = f;
        seeds.emplace_back(f, y);
        if (seeds.size() > 8 * static_cast<size_t>(opts.max_seeds)) {
          std::erase_if(seeds, [&](const auto& s) { return s.first > best + margin(); });
          if (seeds.size() > 8 * static_cast<size_t>(opts.max_seeds)) {
            std::vector<std::pair<double, Vec>> thin;
            for (size_t i = 0; i < seeds.size(); i += 2) thin.push_back(seeds[i]);
            seeds = std::move(thin);
          }
        }
      }
    }
    int j = 0;
    for (; j < prob.m; ++j) {
      if (++idx[static_cast<size_t>(j)] < n_pts) break;
      idx[static_cast<size_t>(j)] = 0;
    }
    if (j == prob.m) break;
  }

  if (!std::isfinite(best)) return out;  // +inf marker, empty feasible set

  std::erase_if(seeds, [&](const auto& s) { return s.first > best + margin(); });
  if (seeds.size() > static_cast<size_t>(opts.max_seeds)) {
    const size_t stride = seeds.size() / static_cast<size_t>(opts.max_seeds) + 1;
    std::vector<std::pair<double, Vec>> thin;
    for (size_t i = 0; i < seeds.size(); i += stride) thin.push_back(seeds[i]);
    seeds = std::move(thin);
  }

  std::vector<std::pair<double, Vec>> refined;
  double value = best;
  for (auto& [f, s] : seeds) {
    Vec yy = s;
    double fy = f;
    out.certificate.refine_iters += refine(prob, x, yy, fy, step.maxCoeff(), lo, hi);
    refined.emplace_back(fy, yy);
    value = std::min(value, fy);
  }
  out.value = value;
  std::erase_if(refined, [&](const auto& s) {
    return s.first > value + opts.cluster_tol * (1.0 + std::abs(value));
  });
  out.argmins =
      cluster_points(std::move(refined), opts.cluster_tol, static_cast<size_t>(opts.max_seeds));
  return out;
}

namespace {

struct ShellSweep {
  SolveResult base;
  std::vector<double> times;
  // Per shell: sampled parameters and their solves.
  std::vector<std::vector<std::pair<Vec, SolveResult>>> shells;
  std::vector<ShellSample> samples;
};

ShellSweep sweep(const expr::ParametricProblem& prob, const Vec& x_bar, const Vec& u,
                 const SequenceSchedule& schedule, const SolveOptions& opts) {
  if (!schedule.valid()) throw SolverError("invalid sequence schedule");
  ShellSweep sw;
  sw.base = solve_value(prob, x_bar, opts);
  if (!sw.base.finite()) throw ValueAtBaseInfinite("V(x_bar) is infinite");
  sw.times = schedule.times();
  const double un = u.norm();
  const double scale = un < 1e-12 ? 1.0 : un;
  const auto dirs =
      geometry::cap_directions(u, opts.cap_delta, schedule.angular_count, opts.seed);
  sw.shells.resize(sw.times.size());
  for (size_t k = 0; k < sw.times.size(); ++k) {
    const double t = sw.times[k];
    for (const Vec& w : dirs) {
      const Vec x = x_bar + t * scale * w;
      SolveResult r = solve_value(prob, x, opts);
      ShellSample row;
      row.k = static_cast<int>(k);
      row.t = t;
      row.direction = scale * w;
      row.value = r.value;
      row.norm = r.finite() ? std::abs(r.value) : std::numeric_limits<double>::infinity();
      sw.samples.push_back(row);
      sw.shells[k].emplace_back(x, std::move(r));
    }
  }
  return sw;
}

std::vector<Vec> shell_argmins(const std::vector<std::pair<Vec, SolveResult>>& shell) {
  std::vector<Vec> all;
  for (const auto& [x, r] : shell)
    for (const Vec& y : r.argmins) all.push_back(y);
  return all;
}

double min_dist(const std::vector<Vec>& pts, const Vec& y) {
  double best = std::numeric_limits<double>::infinity();
  for (const Vec& p : pts) best = std::min(best, (p - y).norm());
  return best;
}

}  // namespace

SetEstimate directional_solutions(const expr::ParametricProblem& prob, const Vec& x_bar,
                                  const Vec& u, const SequenceSchedule& schedule,
                                  const SolveOptions& opts) {
  ShellSweep sw = sweep(prob, x_bar, u, schedule, opts);
  SetEstimate est;
  est.shell_history = sw.samples;

  const double vtol = opts.cluster_tol * (1.0 + std::abs(sw.base.value));
  auto in_base_solution = [&](const Vec& y) {
    return safe_feasible(prob, x_bar, y) &&
           safe_objective(prob, x_bar, y) <= sw.base.value + vtol;
  };

  // Pull a deep-shell candidate into S(x_bar) by refining at the base point.
  // Shell argmins may approach S(x_bar) from outside the base feasible set;
  // a line search toward the nearest base solution restores feasibility
  // before the descent.
  auto refine_at_base = [&](Vec y) -> std::optional<Vec> {
    if (!safe_feasible(prob, x_bar, y)) {
      double best = std::numeric_limits<double>::infinity();
      Vec anchor;
      for (const Vec& b : sw.base.argmins) {
        const double d = (b - y).norm();
        if (d < best) { best = d; anchor = b; }
      }
      if (anchor.size() == 0) return std::nullopt;
      bool found = false;
      for (double theta : {1e-3, 1e-2, 0.1, 0.25, 0.5, 0.75, 1.0}) {
        Vec cand = (1.0 - theta) * y + theta * anchor;
        if (safe_feasible(prob, x_bar, cand)) {
          y = cand;
          found = true;
          break;
        }
      }
      if (!found) return std::nullopt;
    }
    double fy = safe_objective(prob, x_bar, y);
    const double step0 = (prob.y_hi - prob.y_lo).maxCoeff() / (opts.grid_points - 1);
    refine(prob, x_bar, y, fy, step0, prob.y_lo, prob.y_hi);
    if (!in_base_solution(y)) return std::nullopt;
    return y;
  };

  auto candidates_at = [&](size_t shell) {
    std::vector<std::pair<double, Vec>> scored;
    for (const Vec& y : shell_argmins(sw.shells[shell])) scored.emplace_back(0.0, y);
    return cluster_points(std::move(scored), opts.cluster_tol, 64);
  };

  int deepest = -1;
  for (int k = static_cast<int>(sw.shells.size()) - 1; k >= 0; --k) {
    if (!shell_argmins(sw.shells[static_cast<size_t>(k)]).empty()) { deepest = k; break; }
  }

  std::vector<std::pair<double, Vec>> collected;
  std::vector<std::pair<Vec, bool>> refined_candidates;  // (point, converged)
  if (deepest >= 1) {
    const auto deep = candidates_at(static_cast<size_t>(deepest));
    const auto prev = candidates_at(static_cast<size_t>(deepest - 1));
    for (const Vec& c : deep) {
      auto r = refine_at_base(c);
      if (!r) continue;
      bool conv = false;
      // Converged when the previous shell's matching candidate refines to the
      // same base-point limit.
      double best = std::numeric_limits<double>::infinity();
      Vec mate;
      for (const Vec& q : prev) {
        const double d = (q - c).norm();
        if (d < best) { best = d; mate = q; }
      }
      if (mate.size() > 0) {
        auto rm = refine_at_base(mate);
        if (rm && (*rm - *r).norm() <= 10 * opts.cluster_tol) conv = true;
      }
      refined_candidates.emplace_back(*r, conv);
    }
  }

  if (u.norm() < 1e-12) {
    // Constant sequences qualify, so every base argmin belongs to S(x_bar; 0).
    for (const Vec& y : sw.base.argmins) refined_candidates.emplace_back(y, true);
  }

  for (const auto& [y, conv] : refined_candidates) {
    bool dup = false;
    for (const Vec& p : est.points)
      if ((p - y).norm() <= opts.cluster_tol) { dup = true; break; }
    if (dup) continue;
    est.points.push_back(y);
    est.points_converged.push_back(conv);
    // Convergence rate of the argmin chain toward this point.
    std::vector<double> ts, ds;
    for (size_t k = 0; k < sw.shells.size(); ++k) {
      const auto pts = shell_argmins(sw.shells[k]);
      if (pts.empty()) continue;
      ts.push_back(sw.times[k]);
      ds.push_back(min_dist(pts, y));
    }
    auto slope = loglog_slope(ts, ds);
    est.rates.push_back(slope.value_or(std::numeric_limits<double>::infinity()));
  }
  std::vector<size_t> order(est.points.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return lex_less(est.points[a], est.points[b]); });
  SetEstimate sorted;
  sorted.shell_history = std::move(est.shell_history);
  for (size_t i : order) {
    sorted.points.push_back(est.points[i]);
    sorted.points_converged.push_back(est.points_converged[i]);
    sorted.rates.push_back(est.rates[i]);
  }
  return sorted;
}

std::string to_string(StabilityProperty p) {
  switch (p) {
    case StabilityProperty::RestrictedInfCompact: return "RestrictedInfCompact";
    case StabilityProperty::InnerSemicontinuous: return "InnerSemicontinuous";
    case StabilityProperty::InnerCalm: return "InnerCalm";
    case StabilityProperty::InnerCalmStar: return "InnerCalmStar";
  }
  return "?";
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::EmpiricallyHolds: return "EmpiricallyHolds";
    case Verdict::EmpiricallyFails: return "EmpiricallyFails";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "?";
}

const StabilityVerdict* find_verdict(const std::vector<StabilityVerdict>& list,
                                     StabilityProperty p) {
  for (const auto& v : list)
    if (v.property == p) return &v;
  return nullptr;
}

std::vector<StabilityVerdict> stability_diagnostics(const expr::ParametricProblem& prob,
                                                    const Vec& x_bar, const Vec& u,
                                                    const SequenceSchedule& schedule,
                                                    const SolveOptions& opts) {
  ShellSweep sw = sweep(prob, x_bar, u, schedule, opts);
  const size_t K = sw.shells.size();
  const double grid_step = (prob.y_hi - prob.y_lo).maxCoeff() / (opts.grid_points - 1);

  std::vector<std::pair<double, Vec>> base_scored;
  for (const Vec& y : sw.base.argmins) base_scored.emplace_back(0.0, y);
  const auto base_reps = cluster_points(std::move(base_scored), 10 * opts.cluster_tol, 32);

  // An argmin pinned to the search box boundary where the outward step stays
  // feasible and improves is a truncation artifact, not a true minimizer; it
  // must not support any stability verdict.
  auto truncated_by_box = [&](const Vec& x, const Vec& y) {
    for (int j = 0; j < prob.m; ++j) {
      for (double side : {-1.0, 1.0}) {
        const double bound = side < 0 ? prob.y_lo[j] : prob.y_hi[j];
        if (std::abs(y[j] - bound) > grid_step) continue;
        Vec out = y;
        out[j] = bound + side * 2 * grid_step;
        if (!safe_feasible(prob, x, out)) continue;
        const double fy = safe_objective(prob, x, y);
        if (safe_objective(prob, x, out) < fy - 1e-12 * (1.0 + std::abs(fy))) return true;
      }
    }
    return false;
  };

  // Distance sequences from each shell's argmin union, truncation filtered.
  std::vector<double> ts;
  std::vector<std::vector<Vec>> arg_by_shell;
  for (size_t k = 0; k < K; ++k) {
    std::vector<Vec> kept;
    for (const auto& [x, r] : sw.shells[k])
      for (const Vec& y : r.argmins)
        if (!truncated_by_box(x, y)) kept.push_back(y);
    arg_by_shell.push_back(std::move(kept));
    ts.push_back(sw.times[k]);
  }
  size_t nonempty_tail = 0;
  for (size_t k = K; k-- > 0 && !arg_by_shell[k].empty();) ++nonempty_tail;

  std::vector<StabilityVerdict> out;

  // ---- Restricted inf-compactness -----------------------------------------
  {
    StabilityVerdict v{StabilityProperty::RestrictedInfCompact, Verdict::Inconclusive, {}, {}};
    const double eps_level = 0.5 * (1.0 + std::abs(sw.base.value));
    std::vector<Vec> relevant;
    bool any_relevant = false;
    for (size_t k = 0; k < K; ++k) {
      for (const auto& [x, r] : sw.shells[k]) {
        if (!r.finite() || r.value >= sw.base.value + eps_level) continue;
        any_relevant = true;
        for (const Vec& y : r.argmins) relevant.push_back(y);
      }
    }
    for (const Vec& y : sw.base.argmins) relevant.push_back(y);
    if (!any_relevant && sw.base.argmins.empty()) {
      v.witnesses.push_back("no solvable sample with V(x) < V(x_bar) + eps");
    } else {
      // Escape detection: the box truncates a minimizing branch that leaves
      // every compact candidate set. Boundary argmins pinned by Gamma itself
      // do not count.
      bool escape = K >= 3;
      for (size_t k = K - std::min<size_t>(3, K); k < K && escape; ++k) {
        bool shell_truncated = false;
        for (const auto& [x, r] : sw.shells[k]) {
          if (!r.finite() || r.value >= sw.base.value + eps_level) continue;
          for (const Vec& y : r.argmins)
            if (truncated_by_box(x, y)) shell_truncated = true;
        }
        if (!shell_truncated) escape = false;
      }
      if (escape) {
        v.verdict = Verdict::EmpiricallyFails;
        v.witnesses.push_back("near-optimal argmins pinned to the search box boundary");
      } else {
        Vec lo = prob.y_hi, hi = prob.y_lo;
        for (const Vec& y : relevant) {
          lo = lo.cwiseMin(y);
          hi = hi.cwiseMax(y);
        }
        const Vec pad = 0.1 * (hi - lo).cwiseMax(1e-6);
        v.verdict = Verdict::EmpiricallyHolds;
        v.witnesses.push_back("Omega_u box [" + std::to_string((lo - pad)[0]) + ", " +
                              std::to_string((hi + pad)[0]) + "]^" + std::to_string(prob.m));
      }
    }
    out.push_back(std::move(v));
  }

  // ---- Inner semicontinuity / calmness at some base solution --------------
  auto analyze_candidate = [&](const Vec& ybar) {
    std::vector<double> tt, dd;
    for (size_t k = 0; k < K; ++k) {
      if (arg_by_shell[k].empty()) continue;
      tt.push_back(ts[k]);
      dd.push_back(min_dist(arg_by_shell[k], ybar));
    }
    return std::make_pair(tt, dd);
  };

  // Ratio verdict for ||y_k - y_bar|| <= kappa ||x_k - x_bar||: holds when the
  // tail ratios are uniformly bounded and stable, fails when they grow with a
  // sublinear distance exponent.
  struct RatioVerdict {
    bool holds = false;
    bool fails = false;
    double kappa = 0.0;
  };
  auto ratio_verdict = [&](const std::vector<double>& tt, const std::vector<double>& dd) {
    RatioVerdict out;
    if (dd.size() < 4) return out;
    const size_t tail = std::min<size_t>(5, dd.size());
    const size_t b = dd.size() - tail;
    bool all_zero = true;
    for (size_t i = b; i < dd.size(); ++i) all_zero = all_zero && dd[i] <= 1e-10;
    if (all_zero) {
      out.holds = true;
      return out;
    }
    std::vector<double> ratio(dd.size());
    for (size_t i = 0; i < dd.size(); ++i) ratio[i] = dd[i] / tt[i];
    double rmax = 0.0, rmin = std::numeric_limits<double>::infinity();
    for (size_t i = b; i < dd.size(); ++i) {
      rmax = std::max(rmax, ratio[i]);
      rmin = std::min(rmin, ratio[i]);
    }
    auto slope = loglog_slope(tt, dd);
    if ((slope && *slope >= 0.9) || rmax <= 2.0 * std::max(rmin, 1e-12)) {
      out.holds = true;
      out.kappa = rmax;
      return out;
    }
    if (slope && *slope <= 0.8) {
      bool increasing = true;
      for (size_t i = b; i + 1 < dd.size(); ++i)
        if (ratio[i + 1] < ratio[i]) { increasing = false; break; }
      out.fails = increasing;
    }
    return out;
  };

  // Limit of the per-shell nearest-argmin chain toward `seed`, extrapolated
  // geometrically when the steps decay at a stable rate. Anchoring calmness*
  // at the raw deepest argmin would trivially match its own tail.
  auto extrapolated_anchor = [&](const Vec& seed) -> Vec {
    std::vector<Vec> chain;
    for (size_t k = 0; k < K; ++k) {
      if (arg_by_shell[k].empty()) continue;
      const Vec* bestp = nullptr;
      double bd = std::numeric_limits<double>::infinity();
      const Vec& ref = chain.empty() ? seed : chain.back();
      for (const Vec& y : arg_by_shell[k]) {
        const double d = (y - ref).norm();
        if (d < bd) { bd = d; bestp = &y; }
      }
      if (bestp) chain.push_back(*bestp);
    }
    if (chain.size() < 4) return seed;
    const Vec d1 = chain[chain.size() - 1] - chain[chain.size() - 2];
    const Vec d2 = chain[chain.size() - 2] - chain[chain.size() - 3];
    const double n1 = d1.norm(), n2 = d2.norm();
    if (n1 <= 1e-12) return chain.back();
    const double q = n1 / std::max(n2, 1e-300);
    if (q >= 0.95 || n2 <= 1e-12) return chain.back();
    return chain.back() + d1 * (q / (1.0 - q));
  };

  {
    StabilityVerdict v{StabilityProperty::InnerSemicontinuous, Verdict::Inconclusive, {}, {}};
    if (nonempty_tail == 0) {
      v.verdict = Verdict::EmpiricallyFails;
      v.witnesses.push_back("solution sets empty along the direction");
    } else {
      bool any_holds = false, all_fail = !base_reps.empty();
      for (const Vec& ybar : base_reps) {
        auto [tt, dd] = analyze_candidate(ybar);
        if (dd.size() < 4) { all_fail = false; continue; }
        const double d_last = dd.back();
        const double d_first = dd.front();
        auto slope = loglog_slope(tt, dd);
        const bool holds = d_last <= std::max(5 * opts.cluster_tol, 2 * grid_step) ||
                           (slope && *slope >= 0.15 && d_last <= 0.25 * std::max(d_first, 1e-12));
        double tail_floor = std::numeric_limits<double>::infinity();
        for (size_t i = dd.size() - std::min<size_t>(5, dd.size()); i < dd.size(); ++i)
          tail_floor = std::min(tail_floor, dd[i]);
        const bool fails = !holds && tail_floor >= 10 * opts.cluster_tol && slope &&
                           std::abs(*slope) <= 0.05;
        if (holds) {
          any_holds = true;
          std::ostringstream w;
          w << "y_bar = [";
          for (int j = 0; j < ybar.size(); ++j) w << (j ? ", " : "") << ybar[j];
          w << "], dist tail " << d_last;
          v.witnesses.push_back(w.str());
        }
        if (!fails) all_fail = false;
      }
      if (any_holds)
        v.verdict = Verdict::EmpiricallyHolds;
      else if (all_fail) {
        v.verdict = Verdict::EmpiricallyFails;
        v.witnesses.push_back("persistent positive gap from every base solution");
      }
    }
    out.push_back(std::move(v));
  }

  {
    StabilityVerdict v{StabilityProperty::InnerCalm, Verdict::Inconclusive, {}, {}};
    if (nonempty_tail == 0) {
      v.verdict = Verdict::EmpiricallyFails;
      v.witnesses.push_back("solution sets empty along the direction");
    } else {
      bool any_holds = false, all_fail = !base_reps.empty();
      for (const Vec& ybar : base_reps) {
        auto [tt, dd] = analyze_candidate(ybar);
        const RatioVerdict rv = ratio_verdict(tt, dd);
        if (rv.holds) {
          any_holds = true;
          if (!v.kappa_estimate || rv.kappa > *v.kappa_estimate) v.kappa_estimate = rv.kappa;
        }
        if (!rv.fails) all_fail = false;
      }
      if (any_holds)
        v.verdict = Verdict::EmpiricallyHolds;
      else if (all_fail) {
        v.verdict = Verdict::EmpiricallyFails;
        v.witnesses.push_back("||y_k - y_bar|| / ||x_k - x_bar|| diverges for every base solution");
        v.kappa_estimate.reset();
      }
    }
    out.push_back(std::move(v));
  }

  {
    StabilityVerdict v{StabilityProperty::InnerCalmStar, Verdict::Inconclusive, {}, {}};
    if (nonempty_tail == 0) {
      v.verdict = Verdict::EmpiricallyFails;
      v.witnesses.push_back("solution sets empty along the direction");
    } else {
      // Anchors need not solve the base problem: extrapolated limits of the
      // argmin chains qualify alongside the base solutions.
      std::vector<Vec> anchors = base_reps;
      int deepest = -1;
      for (int k = static_cast<int>(K) - 1; k >= 0; --k)
        if (!arg_by_shell[static_cast<size_t>(k)].empty()) { deepest = k; break; }
      if (deepest >= 0) {
        std::vector<std::pair<double, Vec>> scored;
        for (const Vec& y : arg_by_shell[static_cast<size_t>(deepest)]) scored.emplace_back(0.0, y);
        for (const Vec& y : cluster_points(std::move(scored), opts.cluster_tol, 16))
          anchors.push_back(extrapolated_anchor(y));
      }
      bool any_holds = false, all_fail = !anchors.empty();
      for (const Vec& ybar : anchors) {
        auto [tt, dd] = analyze_candidate(ybar);
        const RatioVerdict rv = ratio_verdict(tt, dd);
        if (rv.holds) {
          any_holds = true;
          if (!v.kappa_estimate || rv.kappa > *v.kappa_estimate) v.kappa_estimate = rv.kappa;
        }
        if (!rv.fails) all_fail = false;
      }
      if (any_holds)
        v.verdict = Verdict::EmpiricallyHolds;
      else if (all_fail) {
        v.verdict = Verdict::EmpiricallyFails;
        v.witnesses.push_back("no anchor keeps ||y_k - y|| <= kappa ||x_k - x_bar||");
        v.kappa_estimate.reset();
      }
    }
    out.push_back(std::move(v));
  }

  // ---- Lattice reconciliation (calm => semicontinuous => inf-compact,
  //      calm => calm*) ------------------------------------------------------
  auto get = [&](StabilityProperty p) -> StabilityVerdict* {
    for (auto& v : out)
      if (v.property == p) return &v;
    return nullptr;
  };
  const std::pair<StabilityProperty, StabilityProperty> edges[] = {
      {StabilityProperty::InnerCalm, StabilityProperty::InnerSemicontinuous},
      {StabilityProperty::InnerCalm, StabilityProperty::InnerCalmStar},
      {StabilityProperty::InnerSemicontinuous, StabilityProperty::RestrictedInfCompact},
  };
  for (auto [strong, weak] : edges) {
    auto* s = get(strong);
    auto* w = get(weak);
    if (s && w && s->verdict == Verdict::EmpiricallyHolds &&
        w->verdict == Verdict::EmpiricallyFails) {
      s->verdict = Verdict::Inconclusive;
      w->verdict = Verdict::Inconclusive;
      s->witnesses.push_back("implication conflict with " + to_string(weak));
      w->witnesses.push_back("implication conflict with " + to_string(strong));
    }
  }
  return out;
}

}  // namespace dirsens::solver
