#pragma once

#include <vector>

namespace dirsens {

// Geometric sequence t_k = t0 * rho^k realizing the "t_k down to 0" sampling
// plans; angular_count directions are drawn per shell.
struct SequenceSchedule {
  double t0 = 1e-1;
  double rho = 0.5;
  int shells = 20;
  int angular_count = 8;

  bool valid() const {
    return t0 > 0.0 && rho > 0.0 && rho < 1.0 && shells > 0 &&
           angular_count > 0;
  }

  std::vector<double> times() const {
    std::vector<double> t(static_cast<size_t>(shells));
    double v = t0;
    for (int k = 0; k < shells; ++k, v *= rho) t[static_cast<size_t>(k)] = v;
    return t;
  }
};

}  // namespace dirsens
