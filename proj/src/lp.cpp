#include "dirsens/lp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dirsens::lp {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr int kMaxIters = 50000;
constexpr int kBlandSwitch = 2000;

// Dense tableau simplex over equality-standard form  min c'z, Bz = r, z >= 0.
// Columns are partitioned as [structural | artificial]. Dantzig pricing with a
// largest-pivot tie break runs first; after kBlandSwitch iterations the rule
// degrades to strict Bland, which cannot cycle.
class Tableau {
 public:
  Tableau(const Mat& B, const Vec& r, Eigen::Index n_struct)
      : m_(B.rows()), n_(B.cols()), n_struct_(n_struct), t_(B.rows(), B.cols() + 1),
        basis_(B.rows()) {
    t_.leftCols(n_) = B;
    t_.col(n_) = r;
  }

  Eigen::Index rows() const { return m_; }
  Eigen::Index cols() const { return n_; }
  int basis(Eigen::Index i) const { return basis_[i]; }
  void set_basis(Eigen::Index i, int j) { basis_[i] = j; }
  double rhs(Eigen::Index i) const { return t_(i, n_); }
  double at(Eigen::Index i, Eigen::Index j) const { return t_(i, j); }

  void pivot(Eigen::Index pr, Eigen::Index pc) {
    t_.row(pr) /= t_(pr, pc);
    for (Eigen::Index i = 0; i < m_; ++i) {
      if (i == pr) continue;
      const double factor = t_(i, pc);
      if (std::abs(factor) > 0.0) t_.row(i) -= factor * t_.row(pr);
    }
    basis_[pr] = static_cast<int>(pc);
  }

  // Runs simplex on the current basis for costs `cost` (length n_). Entering
  // candidates are restricted to columns < col_limit. Returns false when the
  // problem is unbounded below.
  bool run(const Vec& cost, Eigen::Index col_limit) {
    for (int iter = 0; iter < kMaxIters; ++iter) {
      const bool bland = iter >= kBlandSwitch;
      Vec y = reduced_costs(cost);
      Eigen::Index enter = -1;
      double most_negative = -kPivotTol;
      for (Eigen::Index j = 0; j < col_limit; ++j) {
        if (is_basic(j)) continue;
        if (y[j] < most_negative) {
          enter = j;
          if (bland) break;
          most_negative = y[j];
        }
      }
      if (enter < 0) return true;
      Eigen::Index leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < m_; ++i) {
        const double a = t_(i, enter);
        if (a <= kPivotTol) continue;
        const double ratio = t_(i, n_) / a;
        if (leave < 0 || ratio < best - kPivotTol * (1.0 + std::abs(best))) {
          best = ratio;
          leave = i;
        } else if (ratio < best + kPivotTol * (1.0 + std::abs(best))) {
          // Tie break: strict Bland once switched, otherwise largest pivot.
          if (bland ? basis_[i] < basis_[leave] : a > t_(leave, enter)) leave = i;
        }
      }
      if (leave < 0) return false;
      pivot(leave, enter);
    }
    throw std::runtime_error("lp: simplex iteration limit exceeded");
  }

  double objective(const Vec& cost) const {
    double v = 0.0;
    for (Eigen::Index i = 0; i < m_; ++i) v += cost[basis_[i]] * t_(i, n_);
    return v;
  }

  Vec primal(Eigen::Index n_take) const {
    Vec z = Vec::Zero(n_);
    for (Eigen::Index i = 0; i < m_; ++i) z[basis_[i]] = t_(i, n_);
    return z.head(n_take);
  }

 private:
  bool is_basic(Eigen::Index j) const {
    for (Eigen::Index i = 0; i < m_; ++i)
      if (basis_[i] == static_cast<int>(j)) return true;
    return false;
  }

  Vec reduced_costs(const Vec& cost) const {
    Vec y = cost;
    for (Eigen::Index i = 0; i < m_; ++i) {
      const double cb = cost[basis_[i]];
      if (cb != 0.0) y -= cb * t_.row(i).head(n_).transpose();
    }
    return y;
  }

  Eigen::Index m_, n_, n_struct_;
  Mat t_;
  std::vector<int> basis_;
};

}  // namespace

Result solve(const Mat& A, const Vec& b, const Mat& E, const Vec& f,
             const Vec& c) {
  const Eigen::Index n = c.size();
  const Eigen::Index mi = A.rows();
  const Eigen::Index me = E.rows();
  const Eigen::Index m = mi + me;

  if (m == 0) {
    // Unconstrained: bounded only for c = 0.
    Result r;
    if (c.lpNorm<Eigen::Infinity>() <= kPivotTol) {
      r.status = Status::Optimal;
      r.x = Vec::Zero(n);
      r.objective = 0.0;
    } else {
      r.status = Status::Unbounded;
    }
    return r;
  }

  // Standard form over z = [u; w; s] >= 0 with x = u - w and slacks s.
  // Rows are rescaled to unit max coefficient so degenerate rows coming out
  // of eliminations do not destabilize the pivoting.
  const Eigen::Index ns = 2 * n + mi;
  Mat B = Mat::Zero(m, ns + m);
  Vec r = Vec::Zero(m);
  auto row_scale = [](const auto& row) {
    const double s = row.cwiseAbs().maxCoeff();
    return s > 1e-14 ? s : 1.0;
  };
  for (Eigen::Index i = 0; i < mi; ++i) {
    const double s = row_scale(A.row(i));
    B.row(i).segment(0, n) = A.row(i) / s;
    B.row(i).segment(n, n) = -A.row(i) / s;
    B(i, 2 * n + i) = 1.0;
    r[i] = b[i] / s;
  }
  for (Eigen::Index i = 0; i < me; ++i) {
    const double s = row_scale(E.row(i));
    B.row(mi + i).segment(0, n) = E.row(i) / s;
    B.row(mi + i).segment(n, n) = -E.row(i) / s;
    r[mi + i] = f[i] / s;
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    if (r[i] < 0) { B.row(i) = -B.row(i); r[i] = -r[i]; }
    B(i, ns + i) = 1.0;  // artificial
  }

  Tableau t(B, r, ns);
  for (Eigen::Index i = 0; i < m; ++i) t.set_basis(i, static_cast<int>(ns + i));

  Vec phase1 = Vec::Zero(ns + m);
  phase1.tail(m).setOnes();
  if (!t.run(phase1, ns + m))
    throw std::runtime_error("lp: phase-1 unbounded (internal error)");

  const double scale = 1.0 + r.lpNorm<Eigen::Infinity>();
  if (t.objective(phase1) > 1e-8 * scale) {
    Result res;
    res.status = Status::Infeasible;
    return res;
  }

  // Drive any degenerate artificial out of the basis.
  for (Eigen::Index i = 0; i < m; ++i) {
    if (t.basis(i) >= static_cast<int>(ns)) {
      for (Eigen::Index j = 0; j < ns; ++j) {
        if (std::abs(t.at(i, j)) > kPivotTol) { t.pivot(i, j); break; }
      }
    }
  }

  Vec phase2 = Vec::Zero(ns + m);
  phase2.segment(0, n) = c;
  phase2.segment(n, n) = -c;
  // Rows whose artificial is still basic are redundant; blocking artificial
  // columns from entering keeps them fixed at zero.
  const bool bounded = t.run(phase2, ns);

  Result res;
  if (!bounded) {
    res.status = Status::Unbounded;
    return res;
  }
  Vec z = t.primal(ns);
  res.status = Status::Optimal;
  res.x = z.segment(0, n) - z.segment(n, n);
  res.objective = c.dot(res.x);
  return res;
}

}  // namespace dirsens::lp
