#include "dirsens/variational_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

namespace dirsens::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string key_of(const Vec& x) {
  return std::string(reinterpret_cast<const char*>(x.data()), sizeof(double) * x.size());
}

std::optional<double> loglog_slope(const std::vector<double>& t, const std::vector<double>& q) {
  std::vector<double> xs, ys;
  for (size_t i = 0; i < t.size(); ++i)
    if (std::isfinite(q[i]) && std::abs(q[i]) > 1e-14) {
      xs.push_back(std::log(t[i]));
      ys.push_back(std::log(std::abs(q[i])));
    }
  if (xs.size() < 4) return std::nullopt;
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

// A sequence q_k over t_k down to 0 "diverges up" when its tail reaches +inf
// or the hard threshold, or grows monotonically with a stable negative
// power-law exponent in t (so its extrapolation passes any threshold).
bool diverges_up(const std::vector<double>& t, const std::vector<double>& q, double threshold) {
  if (q.empty()) return false;
  const size_t tail = std::min<size_t>(5, q.size());
  const size_t b = q.size() - tail;
  for (size_t i = b; i < q.size(); ++i)
    if (q[i] == kInf) return true;
  const double last = q.back();
  if (last > threshold) return true;
  bool mono = last > 0;
  for (size_t i = b; mono && i + 1 < q.size(); ++i)
    if (!(q[i + 1] >= q[i] * (1.0 - 1e-9)) || q[i + 1] <= 0) mono = false;
  if (!mono) return false;
  auto slope = loglog_slope(t, q);
  return slope && *slope <= -0.1;
}

std::vector<double> negated(const std::vector<double>& q) {
  std::vector<double> n(q.size());
  for (size_t i = 0; i < q.size(); ++i) n[i] = -q[i];
  return n;
}

struct Tail {
  double lo = kInf, hi = -kInf;
};

Tail finite_tail(const std::vector<double>& q, size_t count) {
  Tail t;
  size_t seen = 0;
  for (size_t i = q.size(); i-- > 0 && seen < count;) {
    if (!std::isfinite(q[i])) continue;
    t.lo = std::min(t.lo, q[i]);
    t.hi = std::max(t.hi, q[i]);
    ++seen;
  }
  return t;
}

}  // namespace

double ValueFunction::operator()(const Vec& x) const {
  const std::string key = key_of(x);
  {
    std::lock_guard<std::mutex> lock(state_->mutex);
    auto it = state_->cache.find(key);
    if (it != state_->cache.end()) return it->second;
  }
  const double v = fn_(x);
  std::lock_guard<std::mutex> lock(state_->mutex);
  state_->cache.emplace(key, v);
  return v;
}

ValueFunction solver_value_function(const expr::ParametricProblem& prob,
                                    const solver::SolveOptions& opts) {
  return ValueFunction(prob.n, [prob, opts](const Vec& x) {
    return solver::solve_value(prob, x, opts).value;
  });
}

// ---------------------------------------------------------------------------
// Dini estimates

namespace {

double base_value_or_throw(const ValueFunction& V, const Vec& x_bar) {
  const double v = V(x_bar);
  if (!std::isfinite(v)) throw ValueAtBaseInfinite("V(x_bar) is infinite");
  return v;
}

DiniEstimate classify_quotients(const std::vector<double>& times,
                                const std::vector<double>& upper_q,
                                const std::vector<double>& lower_q,
                                const OracleOptions& opts) {
  DiniEstimate est;
  est.samples = upper_q;
  const Tail tu = finite_tail(upper_q, 5);
  const Tail tl = finite_tail(lower_q, 5);
  est.upper = tu.hi == -kInf ? kInf : tu.hi;
  est.lower = tl.lo == kInf ? -kInf : tl.lo;

  const double thr = opts.div_threshold;
  if (diverges_up(times, upper_q, thr)) est.upper = kInf;
  if (diverges_up(times, negated(upper_q), thr)) est.upper = -kInf;
  if (diverges_up(times, negated(lower_q), thr)) est.lower = -kInf;
  // A monotone fully divergent sequence moves the liminf as well.
  if (diverges_up(times, lower_q, thr)) est.lower = kInf;
  if (est.lower > est.upper) std::swap(est.lower, est.upper);
  return est;
}

}  // namespace

DiniEstimate dini(const ValueFunction& V, const Vec& x_bar, const Vec& u,
                  const SequenceSchedule& schedule, const OracleOptions& opts) {
  const double v0 = base_value_or_throw(V, x_bar);
  const auto times = schedule.times();
  if (u.norm() < 1e-12) {
    DiniEstimate est;
    est.samples.assign(times.size(), 0.0);
    return est;  // zero direction gives zero quotients
  }
  std::vector<double> q;
  for (double t : times) {
    const double v = V(x_bar + t * u);
    q.push_back(std::isfinite(v) ? (v - v0) / t : kInf);
  }
  return classify_quotients(times, q, q, opts);
}

DiniEstimate dini_cap(const ValueFunction& V, const Vec& x_bar, const Vec& u,
                      const SequenceSchedule& schedule, const OracleOptions& opts) {
  const double v0 = base_value_or_throw(V, x_bar);
  const auto times = schedule.times();
  const double un = u.norm();
  const double scale = un < 1e-12 ? 1.0 : un;
  const auto dirs =
      geometry::cap_directions(u, opts.cap_delta, schedule.angular_count, opts.seed);
  std::vector<double> qmax, qmin;
  for (double t : times) {
    double hi = -kInf, lo = kInf;
    for (const Vec& w : dirs) {
      const double v = V(x_bar + t * scale * w);
      const double q = std::isfinite(v) ? (v - v0) / t : kInf;
      hi = std::max(hi, q);
      lo = std::min(lo, q);
    }
    qmax.push_back(hi);
    qmin.push_back(lo);
  }
  return classify_quotients(times, qmax, qmin, opts);
}

// ---------------------------------------------------------------------------
// Frechet subgradients

std::vector<Vec> frechet_subgradients(const ValueFunction& V, const Vec& x, double radius,
                                      const OracleOptions& opts) {
  const int n = V.dim();
  const double vx = V(x);
  if (!std::isfinite(vx) || radius <= 0) return {};

  std::vector<Vec> offsets;
  for (int i = 0; i < n; ++i) {
    for (double s : {1.0, -1.0, 0.5, -0.5}) offsets.push_back(s * radius * Vec::Unit(n, i));
  }
  if (n >= 2) {
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        for (double si : {1.0, -1.0})
          for (double sj : {1.0, -1.0}) {
            Vec d = Vec::Zero(n);
            d[i] = si;
            d[j] = sj;
            offsets.push_back(radius / std::sqrt(2.0) * d);
          }
  }

  Mat a = Mat::Zero(n, n);
  Vec b = Vec::Zero(n);
  std::vector<std::pair<Vec, double>> cloud;
  for (const Vec& dz : offsets) {
    const double v = V(x + dz);
    if (!std::isfinite(v)) return {};
    cloud.emplace_back(dz, v);
    a += dz * dz.transpose();
    b += (v - vx) * dz;
  }
  Eigen::LDLT<Mat> fac(a);
  if (fac.info() != Eigen::Success) return {};
  const Vec xi = fac.solve(b);
  if (!xi.allFinite()) return {};

  const double slack = opts.minorant_slack_factor * opts.conv_tol;
  for (const auto& [dz, v] : cloud) {
    if (v < vx + xi.dot(dz) - slack * dz.norm()) return {};
  }
  return {xi};
}

// ---------------------------------------------------------------------------
// Shell sweep shared by the set estimators

namespace {

struct TraceEntry {
  int k;
  double t;
  Vec x;
  Vec dir;
  double v;
  Vec xi;
  bool has_xi = false;
};

struct Sweep {
  double v0 = 0.0;
  std::vector<double> times;
  // One trace per sampled angle; entries ordered by shell.
  std::vector<std::vector<TraceEntry>> traces;
  std::vector<ShellSample> samples;
};

Sweep subgradient_sweep(const ValueFunction& V, const Vec& x_bar, const Vec& u,
                        const SequenceSchedule& schedule, const OracleOptions& opts) {
  Sweep sw;
  sw.v0 = base_value_or_throw(V, x_bar);
  sw.times = schedule.times();
  const double un = u.norm();
  const double scale = un < 1e-12 ? 1.0 : un;
  const auto dirs =
      geometry::cap_directions(u, opts.cap_delta, schedule.angular_count, opts.seed);
  sw.traces.resize(dirs.size());
  for (size_t k = 0; k < sw.times.size(); ++k) {
    const double t = sw.times[k];
    // Budget for |V(x_k) - V(x_bar)|, shrinking with the shells; enforces the
    // value-convergence requirement on admissible sequences.
    const double budget =
        std::pow(t / sw.times.front(), 0.25) * (1.0 + std::abs(sw.v0));
    for (size_t j = 0; j < dirs.size(); ++j) {
      TraceEntry e;
      e.k = static_cast<int>(k);
      e.t = t;
      e.dir = scale * dirs[j];
      e.x = x_bar + t * e.dir;
      e.v = V(e.x);
      ShellSample row;
      row.k = e.k;
      row.t = t;
      row.direction = e.dir;
      row.value = e.v;
      if (std::isfinite(e.v) && std::abs(e.v - sw.v0) <= budget) {
        // Adaptive fit radius: shrink until the minorant check accepts, to
        // ride out curvature blowup near the base point.
        double radius = 0.05 * t * std::max(scale, 1e-6);
        std::vector<Vec> xi;
        for (int h = 0; h < 45 && xi.empty() && radius > 1e-13 * (1.0 + e.x.norm()); ++h) {
          xi = frechet_subgradients(V, e.x, radius, opts);
          radius *= 0.5;
        }
        if (!xi.empty()) {
          e.xi = xi.front();
          e.has_xi = true;
          row.subgradient = e.xi;
          row.norm = e.xi.norm();
        }
      }
      sw.samples.push_back(row);
      sw.traces[j].push_back(std::move(e));
    }
  }
  return sw;
}

struct TraceClass {
  enum Kind { None, Converged, Unsettled, Diverging } kind = None;
  Vec limit;       // subgradient limit (Converged/Unsettled) or unit ray (Diverging)
  bool ray_converged = false;
};

TraceClass classify_trace(const std::vector<TraceEntry>& trace, const OracleOptions& opts) {
  TraceClass out;
  std::vector<double> ts, norms;
  std::vector<const TraceEntry*> with_xi;
  for (const auto& e : trace)
    if (e.has_xi) {
      with_xi.push_back(&e);
      ts.push_back(e.t);
      norms.push_back(e.xi.norm());
    }
  if (with_xi.size() < 3) return out;

  if (diverges_up(ts, norms, opts.div_threshold)) {
    out.kind = TraceClass::Diverging;
    const Vec r_last = unitize(with_xi.back()->xi);
    const Vec r_prev = unitize(with_xi[with_xi.size() - 2]->xi);
    const Vec r_prev2 = unitize(with_xi[with_xi.size() - 3]->xi);
    out.limit = r_last;
    out.ray_converged = (r_last - r_prev).norm() <= opts.conv_tol &&
                        (r_prev - r_prev2).norm() <= opts.conv_tol;
    return out;
  }

  const Vec& last = with_xi.back()->xi;
  const Vec& prev = with_xi[with_xi.size() - 2]->xi;
  const Vec& prev2 = with_xi[with_xi.size() - 3]->xi;
  const double scale = 1.0 + last.norm();
  const bool cauchy = (last - prev).norm() <= opts.conv_tol * scale &&
                      (prev - prev2).norm() <= 2 * opts.conv_tol * scale;
  out.kind = cauchy ? TraceClass::Converged : TraceClass::Unsettled;
  out.limit = last;
  return out;
}

void dedupe_push(std::vector<Vec>& pts, std::vector<bool>& flags, const Vec& v, bool flag,
                 double tol) {
  for (size_t i = 0; i < pts.size(); ++i) {
    if ((pts[i] - v).norm() <= tol * (1.0 + v.norm())) {
      flags[i] = flags[i] || flag;
      return;
    }
  }
  pts.push_back(v);
  flags.push_back(flag);
}

}  // namespace

SetEstimate directional_limiting_subdiff(const ValueFunction& V, const Vec& x_bar, const Vec& u,
                                         const SequenceSchedule& schedule,
                                         const OracleOptions& opts) {
  Sweep sw = subgradient_sweep(V, x_bar, u, schedule, opts);
  SetEstimate est;
  est.shell_history = std::move(sw.samples);
  for (const auto& trace : sw.traces) {
    const TraceClass c = classify_trace(trace, opts);
    if (c.kind == TraceClass::Converged)
      dedupe_push(est.points, est.points_converged, c.limit, true, 3 * opts.conv_tol);
    else if (c.kind == TraceClass::Unsettled)
      dedupe_push(est.points, est.points_converged, c.limit, false, 3 * opts.conv_tol);
  }
  return est;
}

SetEstimate directional_singular_subdiff(const ValueFunction& V, const Vec& x_bar, const Vec& u,
                                         const SequenceSchedule& schedule,
                                         const OracleOptions& opts) {
  Sweep sw = subgradient_sweep(V, x_bar, u, schedule, opts);
  SetEstimate est;
  est.shell_history = std::move(sw.samples);
  for (const auto& trace : sw.traces) {
    const TraceClass c = classify_trace(trace, opts);
    if (c.kind == TraceClass::Diverging)
      dedupe_push(est.rays, est.rays_converged, c.limit, c.ray_converged, opts.conv_tol);
  }
  return est;
}

ClarkeHull directional_clarke_subdiff(const ValueFunction& V, const Vec& x_bar, const Vec& u,
                                      const SequenceSchedule& schedule,
                                      const OracleOptions& opts) {
  if (V.dim() > 3) throw OracleError("clarke hull: parameter dimension above 3");
  const SetEstimate lim = directional_limiting_subdiff(V, x_bar, u, schedule, opts);
  const SetEstimate sing = directional_singular_subdiff(V, x_bar, u, schedule, opts);
  if (!sing.rays.empty() || lim.points.empty())
    throw NotDirectionallyLipschitz(
        "clarke hull requires a nonempty limiting estimate and singular estimate {0}");
  ClarkeHull out;
  out.hull = geometry::v_to_h(lim.points, geometry::GeneratorCone::zero(V.dim()));
  auto v = geometry::h_to_v(out.hull);
  out.vertices = v.vertices;
  return out;
}

std::string to_string(LipschitzKind k) {
  switch (k) {
    case LipschitzKind::Lipschitz: return "Lipschitz";
    case LipschitzKind::NotLipschitz: return "NotLipschitz";
    case LipschitzKind::Inconclusive: return "Inconclusive";
  }
  return "?";
}

std::string to_string(ContinuityKind k) {
  switch (k) {
    case ContinuityKind::EmpiricallyContinuous: return "EmpiricallyContinuous";
    case ContinuityKind::Discontinuous: return "Discontinuous";
    case ContinuityKind::Inconclusive: return "Inconclusive";
  }
  return "?";
}

LipschitzVerdict lipschitz_verdict(const ValueFunction& V, const Vec& x_bar, const Vec& u,
                                   const SequenceSchedule& schedule, const OracleOptions& opts) {
  LipschitzVerdict out;
  if (u.norm() >= 1e-12) {
    const auto cont = continuity_diagnostic(V, x_bar, u, schedule, opts);
    if (cont.kind == ContinuityKind::Discontinuous) {
      out.kind = LipschitzKind::NotLipschitz;
      out.witness = "directional discontinuity: " + cont.witness;
      return out;
    }
  }
  Sweep sw = subgradient_sweep(V, x_bar, u, schedule, opts);
  double modulus = 0.0;
  bool any = false;
  for (const auto& trace : sw.traces) {
    const TraceClass c = classify_trace(trace, opts);
    if (c.kind == TraceClass::Diverging) {
      // Witness pair with a diverging difference quotient along the trace.
      const TraceEntry* deep = nullptr;
      for (auto it = trace.rbegin(); it != trace.rend(); ++it)
        if (it->has_xi) { deep = &*it; break; }
      std::ostringstream w;
      w << "subgradient norm " << (deep ? deep->xi.norm() : kInf)
        << " at x_bar + " << (deep ? deep->t : 0.0) << " * dir";
      out.kind = LipschitzKind::NotLipschitz;
      out.witness = w.str();
      return out;
    }
    for (const auto& e : trace)
      if (e.has_xi) {
        any = true;
        modulus = std::max(modulus, e.xi.norm());
      }
  }
  if (!any) return out;  // Inconclusive: no subgradients sampled

  // Shell stability of the norm bound.
  std::map<int, double> shell_max;
  for (const auto& trace : sw.traces)
    for (const auto& e : trace)
      if (e.has_xi) shell_max[e.k] = std::max(shell_max[e.k], e.xi.norm());
  std::vector<double> ts, ms;
  for (const auto& [k, m] : shell_max) {
    ts.push_back(sw.times[static_cast<size_t>(k)]);
    ms.push_back(m);
  }
  if (diverges_up(ts, ms, opts.div_threshold)) {
    out.kind = LipschitzKind::NotLipschitz;
    out.witness = "shell max subgradient norms diverge";
    return out;
  }
  const size_t tail = std::min<size_t>(5, ms.size());
  double lo = kInf, hi = 0.0;
  for (size_t i = ms.size() - tail; i < ms.size(); ++i) {
    lo = std::min(lo, ms[i]);
    hi = std::max(hi, ms[i]);
  }
  if (hi > 4.0 * std::max(lo, 1e-12) && hi > 10 * opts.conv_tol) return out;  // unstable
  out.kind = LipschitzKind::Lipschitz;
  out.modulus = modulus;
  return out;
}

ContinuityVerdict continuity_diagnostic(const ValueFunction& V, const Vec& x_bar, const Vec& u,
                                        const SequenceSchedule& schedule,
                                        const OracleOptions& opts) {
  const double v0 = base_value_or_throw(V, x_bar);
  const auto times = schedule.times();
  const double un = u.norm();
  const double scale = un < 1e-12 ? 1.0 : un;
  const auto dirs =
      geometry::cap_directions(u, opts.cap_delta, schedule.angular_count, opts.seed);
  std::vector<double> gaps;
  for (double t : times) {
    double g = 0.0;
    for (const Vec& w : dirs) {
      const double v = V(x_bar + t * scale * w);
      g = std::max(g, std::isfinite(v) ? std::abs(v - v0) : kInf);
    }
    gaps.push_back(g);
  }
  ContinuityVerdict out;
  const size_t tail = std::min<size_t>(5, gaps.size());
  double tail_min = kInf, tail_max = 0.0;
  for (size_t i = gaps.size() - tail; i < gaps.size(); ++i) {
    tail_min = std::min(tail_min, gaps[i]);
    tail_max = std::max(tail_max, gaps[i]);
  }
  const double floor = opts.gap_tol * (1.0 + std::abs(v0));
  if (tail_max <= floor) {
    out.kind = ContinuityKind::EmpiricallyContinuous;
    return out;
  }
  auto slope = loglog_slope(times, gaps);
  if (tail_min == kInf || (tail_min >= floor && slope && std::abs(*slope) <= 0.02)) {
    out.kind = ContinuityKind::Discontinuous;
    std::ostringstream w;
    w << "gap " << (tail_min == kInf ? kInf : tail_min) << " persists over the last "
      << tail << " shells";
    out.witness = w.str();
    return out;
  }
  if (slope && *slope >= 0.1 && gaps.back() <= 0.25 * std::max(gaps.front(), 1e-12)) {
    out.kind = ContinuityKind::EmpiricallyContinuous;
    return out;
  }
  return out;
}

void write_shell_csv(std::ostream& out, const std::vector<ShellSample>& samples, int dim) {
  out << "k,t";
  for (int i = 0; i < dim; ++i) out << ",dir" << i;
  out << ",V";
  for (int i = 0; i < dim; ++i) out << ",sub" << i;
  out << ",norm\n";
  for (const auto& s : samples) {
    out << s.k << "," << s.t;
    for (int i = 0; i < dim; ++i)
      out << "," << (i < s.direction.size() ? s.direction[i] : 0.0);
    out << "," << s.value;
    for (int i = 0; i < dim; ++i)
      out << "," << (i < s.subgradient.size() ? s.subgradient[i] : 0.0);
    out << "," << s.norm << "\n";
  }
}

}  // namespace dirsens::oracle
