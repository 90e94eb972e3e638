#pragma once

#include <Eigen/Core>
#include <vector>

namespace psulu {

// Closed half-space h.x <= g in state or control space.
struct HalfSpace {
  Eigen::VectorXd h;
  double g = 0.0;
};

// Region in CNF: conjunction over conjuncts, disjunction over the half-spaces
// inside each conjunct. Convex iff every disjunction is a singleton.
struct Region {
  std::vector<std::vector<HalfSpace>> cnf;

  bool convex() const {
    for (const auto& dis : cnf)
      if (dis.size() != 1) return false;
    return true;
  }
  bool contains(const Eigen::VectorXd& x, double tol = 0.0) const;
};

// Axis-aligned box lo <= (x[ix], x[iy]) <= hi: four singleton conjuncts.
Region box_region(double xlo, double xhi, double ylo, double yhi, int n_x, int ix = 0, int iy = 1);

// Complement of an axis-aligned box: one conjunct of four disjuncts.
Region obstacle_region(double xlo, double xhi, double ylo, double yhi, int n_x, int ix = 0,
                       int iy = 1);

// Speed limit |(x[ivx], x[ivy])| <= v_max approximated by n_rays tangent
// half-spaces, one singleton conjunct each.
Region speed_region(double v_max, int n_rays, int n_x, int ivx, int ivy);

} // namespace psulu
