#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "dirsens/geometry.hpp"

namespace dirsens::testing {

// Small deterministic generator for randomized fixtures.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}
  double uniform(double lo, double hi) {
    state_ = state_ * 6364136223846793005ull + 1442695040888963407ull;
    const double u = static_cast<double>(state_ >> 11) / 9007199254740992.0;
    return lo + u * (hi - lo);
  }
  int uniform_int(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(uniform(0.0, hi - lo + 1.0 - 1e-12));
  }
  Vec vec(int dim, double lo, double hi) {
    Vec v(dim);
    for (int i = 0; i < dim; ++i) v[i] = uniform(lo, hi);
    return v;
  }

 private:
  uint64_t state_;
};

inline double hausdorff(const std::vector<Vec>& a, const std::vector<Vec>& b) {
  if (a.empty() && b.empty()) return 0.0;
  if (a.empty() || b.empty()) return std::numeric_limits<double>::infinity();
  auto one_sided = [](const std::vector<Vec>& p, const std::vector<Vec>& q) {
    double worst = 0.0;
    for (const Vec& x : p) {
      double best = std::numeric_limits<double>::infinity();
      for (const Vec& y : q) best = std::min(best, (x - y).norm());
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(one_sided(a, b), one_sided(b, a));
}

// Unit generators of the regular normal cone of a polyhedron at a point:
// active inequality normals plus both signs of the equality normals.
inline std::vector<Vec> regular_normal_generators(const geometry::Polyhedron& s, const Vec& z) {
  std::vector<Vec> gens;
  for (int i : s.active_ineqs(z)) gens.push_back(unitize(s.ineqs[static_cast<size_t>(i)].a));
  for (const auto& r : s.eqs) {
    gens.push_back(unitize(r.a));
    gens.push_back(Vec(-unitize(r.a)));
  }
  return gens;
}

// Independent enumeration of the directional limiting normal cone: limits of
// regular normal cones along x + t_k d_k with d_k near d. For a polyhedron the
// active pattern stabilizes, so the tail intersection along each perturbation
// converges; the union over perturbations estimates the limit set.
inline std::vector<Vec> brute_force_directional_normal_generators(
    const geometry::Polyhedron& s, const Vec& x, const Vec& d, Rng& rng) {
  std::vector<Vec> dirs{d};
  for (int j = 0; j < 6; ++j) {
    Vec pert = d + 1e-4 * rng.vec(s.dim, -1.0, 1.0);
    dirs.push_back(pert);
  }
  std::vector<Vec> out;
  for (const Vec& dk : dirs) {
    std::vector<Vec> tail;
    bool first = true;
    for (int k = 8; k < 16; ++k) {
      const double t = std::pow(0.5, k);
      const Vec z = x + t * dk;
      if (!s.contains(z)) { tail.clear(); break; }
      auto gens = regular_normal_generators(s, z);
      if (first) {
        tail = gens;
        first = false;
      } else {
        // Keep only generators still present at this deeper shell.
        std::vector<Vec> keep;
        for (const Vec& g : tail)
          for (const Vec& h : gens)
            if ((g - h).norm() <= 1e-9) { keep.push_back(g); break; }
        tail = keep;
      }
    }
    for (const Vec& g : tail) {
      bool dup = false;
      for (const Vec& o : out)
        if ((g - o).norm() <= 1e-9) { dup = true; break; }
      if (!dup) out.push_back(g);
    }
  }
  std::sort(out.begin(), out.end(), [](const Vec& a, const Vec& b) { return lex_less(a, b); });
  return out;
}

}  // namespace dirsens::testing
