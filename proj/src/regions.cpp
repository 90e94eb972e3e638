#include "psulu/regions.hpp"

#include <cmath>
#include <stdexcept>

namespace psulu {

namespace {

HalfSpace axis_halfspace(int n_x, int dim, double sign, double g) {
  HalfSpace hs;
  hs.h = Eigen::VectorXd::Zero(n_x);
  hs.h(dim) = sign;
  hs.g = g;
  return hs;
}

} // namespace

bool Region::contains(const Eigen::VectorXd& x, double tol) const {
  for (const auto& dis : cnf) {
    bool any = false;
    for (const auto& hs : dis) {
      if (hs.h.dot(x) <= hs.g + tol) {
        any = true;
        break;
      }
    }
    if (!any) return false;
  }
  return true;
}

Region box_region(double xlo, double xhi, double ylo, double yhi, int n_x, int ix, int iy) {
  if (xlo > xhi || ylo > yhi) throw std::invalid_argument("box_region: empty box");
  Region r;
  r.cnf.push_back({axis_halfspace(n_x, ix, -1.0, -xlo)});
  r.cnf.push_back({axis_halfspace(n_x, ix, 1.0, xhi)});
  r.cnf.push_back({axis_halfspace(n_x, iy, -1.0, -ylo)});
  r.cnf.push_back({axis_halfspace(n_x, iy, 1.0, yhi)});
  return r;
}

Region obstacle_region(double xlo, double xhi, double ylo, double yhi, int n_x, int ix, int iy) {
  if (xlo > xhi || ylo > yhi) throw std::invalid_argument("obstacle_region: empty box");
  Region r;
  r.cnf.push_back({axis_halfspace(n_x, ix, 1.0, xlo), axis_halfspace(n_x, ix, -1.0, -xhi),
                   axis_halfspace(n_x, iy, 1.0, ylo), axis_halfspace(n_x, iy, -1.0, -yhi)});
  return r;
}

Region speed_region(double v_max, int n_rays, int n_x, int ivx, int ivy) {
  if (n_rays < 3) throw std::invalid_argument("speed_region: need at least 3 rays");
  Region r;
  for (int n = 1; n <= n_rays; ++n) {
    double ang = 2.0 * M_PI * n / n_rays;
    HalfSpace hs;
    hs.h = Eigen::VectorXd::Zero(n_x);
    hs.h(ivx) = std::cos(ang);
    hs.h(ivy) = std::sin(ang);
    hs.g = v_max;
    r.cnf.push_back({hs});
  }
  return r;
}

} // namespace psulu
