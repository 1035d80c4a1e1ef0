#pragma once

#include <Eigen/Dense>
#include <vector>

namespace dirsens {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

// Lexicographic order on coordinates, used to sort generators and rows
// into a canonical order.
inline bool lex_less(const Vec& a, const Vec& b, double tol = 0.0) {
  const Eigen::Index n = std::min(a.size(), b.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a[i] < b[i] - tol) return true;
    if (a[i] > b[i] + tol) return false;
  }
  return a.size() < b.size();
}

inline Vec unitize(const Vec& v, double tol = 1e-14) {
  const double n = v.norm();
  return n > tol ? Vec(v / n) : Vec(Vec::Zero(v.size()));
}

// Clears -0.0 and denormal noise so canonical forms compare exactly.
inline Vec snap_zeros(Vec v, double tol = 1e-13) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) <= tol) v[i] = 0.0;
  return v;
}

}  // namespace dirsens
