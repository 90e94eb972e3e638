#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>

#include <Eigen/Eigenvalues>

#include "psulu/cli.hpp"

namespace psulu {

namespace {

// Axis-aligned box recovered from a region's half-spaces; filled means the
// region is the box itself, hollow means its complement (an obstacle).
struct AxisBox {
  double xlo, xhi, ylo, yhi;
  bool obstacle;
};

bool axis_entry(const HalfSpace& hs, int ix, int iy, int& dim, double& sign, double& g) {
  int nonzero = -1;
  for (long i = 0; i < hs.h.size(); ++i) {
    if (hs.h[i] == 0.0) continue;
    if (nonzero >= 0) return false;
    nonzero = static_cast<int>(i);
  }
  if (nonzero != ix && nonzero != iy) return false;
  const double s = hs.h[nonzero];
  if (s != 1.0 && s != -1.0) return false;
  dim = nonzero == ix ? 0 : 1;
  sign = s;
  g = hs.g;
  return true;
}

std::optional<AxisBox> recognize_box(const Region& r, int ix = 0, int iy = 1) {
  double lo[2], hi[2];
  bool has_lo[2] = {false, false}, has_hi[2] = {false, false};
  const bool obstacle = r.cnf.size() == 1 && r.cnf[0].size() == 4;
  std::vector<HalfSpace> sides;
  if (obstacle) {
    sides = r.cnf[0];
  } else {
    for (const auto& dis : r.cnf) {
      if (dis.size() != 1) return std::nullopt;
      sides.push_back(dis[0]);
    }
    if (sides.size() != 4) return std::nullopt;
  }
  for (const HalfSpace& hs : sides) {
    int dim;
    double sign, g;
    if (!axis_entry(hs, ix, iy, dim, sign, g)) return std::nullopt;
    // Box sides read h.x <= hi and -h.x <= -lo; an obstacle's disjuncts are
    // the complements, so the roles of the two signs swap.
    const bool upper = obstacle ? sign < 0.0 : sign > 0.0;
    if (upper) {
      hi[dim] = sign > 0.0 ? g : -g;
      has_hi[dim] = true;
    } else {
      lo[dim] = sign > 0.0 ? g : -g;
      has_lo[dim] = true;
    }
  }
  if (!has_lo[0] || !has_hi[0] || !has_lo[1] || !has_hi[1]) return std::nullopt;
  return AxisBox{lo[0], hi[0], lo[1], hi[1], obstacle};
}

struct Bounds {
  double xlo = 0.0, xhi = 1.0, ylo = 0.0, yhi = 1.0;
  bool seeded = false;
  void add(double x, double y) {
    if (!seeded) {
      xlo = xhi = x;
      ylo = yhi = y;
      seeded = true;
      return;
    }
    xlo = std::min(xlo, x);
    xhi = std::max(xhi, x);
    ylo = std::min(ylo, y);
    yhi = std::max(yhi, y);
  }
};

} // namespace

void write_svg(const std::string& path, const Scenario& s, const PlanSolution& sol) {
  const auto nominal = propagate_nominal(s.model, s.init.mean, sol.controls);
  const auto covs = propagate_covariance(s.model, s.feedback, s.init.cov);

  std::vector<AxisBox> boxes;
  for (const Region& r : s.regions)
    if (const auto b = recognize_box(r)) boxes.push_back(*b);

  Bounds bb;
  for (const auto& x : nominal) bb.add(x[0], x[1]);
  for (const AxisBox& b : boxes) {
    bb.add(b.xlo, b.ylo);
    bb.add(b.xhi, b.yhi);
  }
  const double margin = 0.1 * std::max(bb.xhi - bb.xlo, bb.yhi - bb.ylo) + 1e-6;
  bb.xlo -= margin;
  bb.xhi += margin;
  bb.ylo -= margin;
  bb.yhi += margin;

  // SVG y points down; flip about the bounding box.
  const auto Y = [&](double y) { return bb.yhi + bb.ylo - y; };
  const double stroke = (bb.xhi - bb.xlo) / 300.0;

  std::ofstream out(path);
  if (!out) throw ScenarioParseError("svg: cannot write '" + path + "'");
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"" << bb.xlo << " " << bb.ylo << " "
      << bb.xhi - bb.xlo << " " << bb.yhi - bb.ylo << "\">\n";

  for (const AxisBox& b : boxes) {
    out << "  <polygon points=\"" << b.xlo << "," << Y(b.ylo) << " " << b.xhi << "," << Y(b.ylo)
        << " " << b.xhi << "," << Y(b.yhi) << " " << b.xlo << "," << Y(b.yhi) << "\" ";
    if (b.obstacle)
      out << "fill=\"#c0392b\" fill-opacity=\"0.45\" stroke=\"#c0392b\"";
    else
      out << "fill=\"none\" stroke=\"#27ae60\"";
    out << " stroke-width=\"" << stroke << "\"/>\n";
  }

  for (size_t t = 0; t < nominal.size(); ++t) {
    const Eigen::Matrix2d pos = covs[t].topLeftCorner(2, 2);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(pos);
    const double rx = 3.0 * std::sqrt(std::max(0.0, es.eigenvalues()[1]));
    const double ry = 3.0 * std::sqrt(std::max(0.0, es.eigenvalues()[0]));
    if (rx <= 0.0) continue;
    const Eigen::Vector2d axis = es.eigenvectors().col(1);
    const double angle = std::atan2(-axis[1], axis[0]) * 180.0 / M_PI; // flipped frame
    out << "  <ellipse cx=\"0\" cy=\"0\" rx=\"" << rx << "\" ry=\"" << std::max(ry, stroke)
        << "\" fill=\"#2980b9\" fill-opacity=\"0.12\" stroke=\"none\" transform=\"translate("
        << nominal[t][0] << " " << Y(nominal[t][1]) << ") rotate(" << angle << ")\"/>\n";
  }

  out << "  <polyline points=\"";
  for (size_t t = 0; t < nominal.size(); ++t)
    out << (t ? " " : "") << nominal[t][0] << "," << Y(nominal[t][1]);
  out << "\" fill=\"none\" stroke=\"#2c3e50\" stroke-width=\"" << stroke << "\"/>\n";

  for (size_t t = 0; t < nominal.size(); ++t)
    out << "  <circle cx=\"" << nominal[t][0] << "\" cy=\"" << Y(nominal[t][1]) << "\" r=\""
        << 1.5 * stroke << "\" fill=\"#2c3e50\"/>\n";
  out << "</svg>\n";
}

void write_csv(const std::string& path, const Scenario& s, const PlanSolution& sol) {
  const auto nominal = propagate_nominal(s.model, s.init.mean, sol.controls);
  const auto covs = propagate_covariance(s.model, s.feedback, s.init.cov);
  const int n_x = s.model.n_x();
  const int n_u = s.model.n_u();

  std::ofstream out(path);
  if (!out) throw ScenarioParseError("csv: cannot write '" + path + "'");
  out << "t";
  for (int i = 0; i < n_x; ++i) out << ",x" << i;
  for (int i = 0; i < n_u; ++i) out << ",u" << i;
  for (int i = 0; i < n_x; ++i) out << ",sd" << i;
  out << "\n";

  char buf[32];
  const auto cell = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << "," << buf;
  };
  for (int t = 0; t <= s.model.N; ++t) {
    out << t;
    for (int i = 0; i < n_x; ++i) cell(nominal[static_cast<size_t>(t)][i]);
    for (int i = 0; i < n_u; ++i) {
      if (t < s.model.N)
        cell(sol.controls[static_cast<size_t>(t)][i]);
      else
        out << ",";
    }
    for (int i = 0; i < n_x; ++i)
      cell(std::sqrt(std::max(0.0, covs[static_cast<size_t>(t)](i, i))));
    out << "\n";
  }
}

} // namespace psulu
