#pragma once

#include "dirsens/linalg.hpp"

namespace dirsens::lp {

enum class Status { Optimal, Infeasible, Unbounded };

struct Result {
  Status status = Status::Infeasible;
  Vec x;
  double objective = 0.0;
  bool optimal() const { return status == Status::Optimal; }
};

// Minimize c'x subject to A x <= b and E x = f, with x free.
// Dense two-phase simplex with Bland's rule; intended for the small systems
// that arise in cone and multiplier computations (tens of rows/columns).
Result solve(const Mat& A, const Vec& b, const Mat& E, const Vec& f,
             const Vec& c);

inline Result maximize(const Mat& A, const Vec& b, const Mat& E, const Vec& f,
                       const Vec& c) {
  Result r = solve(A, b, E, f, Vec(-c));
  r.objective = -r.objective;
  return r;
}

inline bool feasible(const Mat& A, const Vec& b, const Mat& E, const Vec& f) {
  const Eigen::Index n = A.cols() > 0 ? A.cols() : E.cols();
  return solve(A, b, E, f, Vec::Zero(n)).optimal();
}

}  // namespace dirsens::lp
