#pragma once

#include <vector>

#include "dirsens/linalg.hpp"

namespace dirsens {

// One raw sample row of a shell sweep; serialized to CSV for plotting.
struct ShellSample {
  int k = 0;
  double t = 0.0;
  Vec direction;
  double value = 0.0;
  Vec subgradient;  // empty when the row carries no subgradient
  double norm = 0.0;
};

// Finite estimate of a set defined by limits: candidate limit points, unit
// recession/horizon rays, and the raw shell data behind them. The empty
// estimate is representable and distinct from {0} (a points entry of 0).
struct SetEstimate {
  std::vector<Vec> points;
  std::vector<Vec> rays;
  std::vector<bool> points_converged;
  std::vector<bool> rays_converged;
  std::vector<double> rates;  // per-point convergence rate exponents, when known
  std::vector<ShellSample> shell_history;

  bool empty() const { return points.empty() && rays.empty(); }
  bool all_converged() const {
    for (bool b : points_converged)
      if (!b) return false;
    for (bool b : rays_converged)
      if (!b) return false;
    return true;
  }
};

}  // namespace dirsens
