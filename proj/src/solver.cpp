#include "psulu/solver.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>

namespace psulu {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::IterationLimit: return "iteration_limit";
    case SolveStatus::NumericalError: return "numerical_error";
  }
  return "unknown";
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Scaled {
  MatrixXd Q, G, A;
  VectorXd c, h, b;
  bool trivially_infeasible = false;
};

// Normalize inequality/equality rows by their inf-norm and drop all-zero rows
// (an all-zero row with an unsatisfiable right-hand side makes the whole
// problem infeasible outright).
Scaled scale_rows(const LpQpProblem& p) {
  Scaled s;
  s.Q = p.Q;
  s.c = p.c;

  const int n = p.n();
  std::vector<int> keep_g, keep_a;
  for (int i = 0; i < p.G.rows(); ++i) {
    const double norm = p.G.row(i).cwiseAbs().maxCoeff();
    if (norm <= 0.0) {
      if (p.h(i) < -1e-12) s.trivially_infeasible = true;
    } else {
      keep_g.push_back(i);
    }
  }
  for (int i = 0; i < p.A.rows(); ++i) {
    const double norm = p.A.row(i).cwiseAbs().maxCoeff();
    if (norm <= 0.0) {
      if (std::abs(p.b(i)) > 1e-12) s.trivially_infeasible = true;
    } else {
      keep_a.push_back(i);
    }
  }

  s.G.resize(static_cast<int>(keep_g.size()), n);
  s.h.resize(static_cast<int>(keep_g.size()));
  for (int k = 0; k < s.G.rows(); ++k) {
    const int i = keep_g[static_cast<size_t>(k)];
    const double norm = p.G.row(i).cwiseAbs().maxCoeff();
    s.G.row(k) = p.G.row(i) / norm;
    s.h(k) = p.h(i) / norm;
  }
  s.A.resize(static_cast<int>(keep_a.size()), n);
  s.b.resize(static_cast<int>(keep_a.size()));
  for (int k = 0; k < s.A.rows(); ++k) {
    const int i = keep_a[static_cast<size_t>(k)];
    const double norm = p.A.row(i).cwiseAbs().maxCoeff();
    s.A.row(k) = p.A.row(i) / norm;
    s.b(k) = p.b(i) / norm;
  }
  return s;
}

double objective(const Scaled& w, const VectorXd& x) {
  double v = w.c.dot(x);
  if (w.Q.size() > 0) v += 0.5 * x.dot(w.Q * x);
  return v;
}

// Largest step in (0, 1] keeping v + a*dv >= 0.
double step_to_boundary(const VectorXd& v, const VectorXd& dv) {
  double a = 1.0;
  for (int i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) a = std::min(a, -v(i) / dv(i));
  }
  return a;
}

// Mehrotra predictor-corrector on the scaled problem, started at x0. The
// Newton systems are reduced to the positive definite matrix
//   M = Q + G' diag(z/s) G + reg*I
// solved by Cholesky, with equality multipliers recovered through the Schur
// complement A M^-1 A'. One refinement pass per solve keeps the factorization
// error below the convergence tolerance.
LpQpResult ipm_core(const Scaled& w, const VectorXd& x0, const IpmOptions& opt) {
  const int n = static_cast<int>(w.c.size());
  const int m = static_cast<int>(w.G.rows());
  const int p = static_cast<int>(w.A.rows());

  LpQpResult res;
  VectorXd x = x0;
  VectorXd s(m), z(m);
  {
    const VectorXd slack = w.h - w.G * x;
    for (int i = 0; i < m; ++i) {
      s(i) = std::max(slack(i), 1e-2 * (1.0 + std::abs(w.h(i))));
      z(i) = 1.0;
    }
  }
  VectorXd y = VectorXd::Zero(p);

  const double c_scale = 1.0 + w.c.cwiseAbs().maxCoeff();
  const double h_scale = 1.0 + (m > 0 ? w.h.cwiseAbs().maxCoeff() : 0.0);
  const double b_scale = 1.0 + (p > 0 ? w.b.cwiseAbs().maxCoeff() : 0.0);

  Eigen::LLT<MatrixXd> lltM, lltS;
  MatrixXd Minv_At;
  int stalls = 0;
  double best_kkt = std::numeric_limits<double>::infinity();
  double track_kkt = std::numeric_limits<double>::infinity();
  int since_best = 0;
  const bool trace = std::getenv("PSULU_IPM_TRACE") != nullptr;

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    VectorXd rd = w.c + w.G.transpose() * z;
    if (w.Q.size() > 0) rd += w.Q * x;
    if (p > 0) rd += w.A.transpose() * y;
    const VectorXd rp = w.G * x + s - w.h;
    const VectorXd re = p > 0 ? VectorXd(w.A * x - w.b) : VectorXd();
    const double mu = m > 0 ? s.dot(z) / m : 0.0;

    const double obj = objective(w, x);
    double infeas = rd.cwiseAbs().maxCoeff() / c_scale;
    if (m > 0) infeas = std::max(infeas, rp.cwiseAbs().maxCoeff() / h_scale);
    if (p > 0) infeas = std::max(infeas, re.cwiseAbs().maxCoeff() / b_scale);
    const double kkt = std::max(infeas, mu / (1.0 + std::abs(obj)));

    if (kkt <= opt.tol) {
      res.x = x;
      res.value = obj;
      res.iterations = iter;
      res.kkt_residual = kkt;
      res.status = SolveStatus::Optimal;
      return res;
    }
    if (kkt < best_kkt) {
      best_kkt = kkt;
      res.x = x;
      res.value = obj;
      res.iterations = iter;
      res.kkt_residual = kkt;
    }
    // Give up once progress has flatlined; the best iterate is kept.
    if (kkt < 0.9 * track_kkt) {
      track_kkt = kkt;
      since_best = 0;
    } else if (++since_best >= 10) {
      break;
    }
    if (x.cwiseAbs().maxCoeff() > 1e12 || obj < -1e15) {
      res.status = SolveStatus::Unbounded;
      return res;
    }

    // Assemble and factor the reduced matrix, bumping the regularization
    // until Cholesky succeeds. Refinement targets the regularized matrix:
    // chasing the exact one diverges near degenerate optima, while the
    // perturbation this leaves behind is bounded by the mu floor above.
    const VectorXd wgt = z.cwiseQuotient(s);
    MatrixXd M = w.G.transpose() * wgt.asDiagonal() * w.G;
    if (w.Q.size() > 0) M += w.Q;
    double scale_m = std::max(1.0, M.diagonal().cwiseAbs().maxCoeff());
    double reg = 1e-11 * scale_m;
    bool factored = false;
    for (int attempt = 0; attempt < 6; ++attempt) {
      MatrixXd Mr = M + reg * MatrixXd::Identity(n, n);
      lltM.compute(Mr);
      if (lltM.info() == Eigen::Success) {
        M = std::move(Mr);
        factored = true;
        break;
      }
      reg *= 100.0;
    }
    if (!factored) {
      res.status = SolveStatus::NumericalError;
      res.note = "reduced system not positive definite";
      return res;
    }

    auto solve_m = [&](const VectorXd& rhs) {
      VectorXd v = lltM.solve(rhs);
      const double rhs_norm = rhs.norm();
      for (int pass = 0; pass < 4; ++pass) {
        const VectorXd r = rhs - M * v;
        if (r.norm() <= 1e-13 * (1.0 + rhs_norm)) break;
        v += lltM.solve(r);
      }
      return v;
    };

    MatrixXd S;
    if (p > 0) {
      Minv_At = lltM.solve(w.A.transpose());
      S = w.A * Minv_At + reg * MatrixXd::Identity(p, p);
      lltS.compute(S);
      if (lltS.info() != Eigen::Success) {
        res.status = SolveStatus::NumericalError;
        res.note = "equality Schur complement not positive definite";
        return res;
      }
    }

    // Newton direction for complementarity target rc (S z e - target happens
    // inside rc already): solves
    //   Q dx + G'dz + A'dy = -rd,  A dx = -re,  G dx + ds = -rp,
    //   z.*ds + s.*dz = -rc.
    auto direction = [&](const VectorXd& rc, VectorXd& dx, VectorXd& ds, VectorXd& dz,
                         VectorXd& dy) {
      const VectorXd rhs_x = -rd + w.G.transpose() * ((rc - z.cwiseProduct(rp)).cwiseQuotient(s));
      if (p > 0) {
        const VectorXd t = solve_m(rhs_x);
        VectorXd rhs_y = w.A * t + re;
        dy = lltS.solve(rhs_y);
        dy += lltS.solve(rhs_y - S * dy);
        dx = solve_m(rhs_x - w.A.transpose() * dy);
      } else {
        dy.resize(0);
        dx = solve_m(rhs_x);
      }
      ds = -rp - w.G * dx;
      dz = (-rc - z.cwiseProduct(ds)).cwiseQuotient(s);
    };

    VectorXd dxa, dsa, dza, dya;
    direction(s.cwiseProduct(z), dxa, dsa, dza, dya);
    double sigma = 0.0;
    if (m > 0) {
      const double aff = std::min(step_to_boundary(s, dsa), step_to_boundary(z, dza));
      const double mu_aff = (s + aff * dsa).dot(z + aff * dza) / m;
      sigma = std::pow(std::clamp(mu_aff / std::max(mu, 1e-300), 0.0, 1.0), 3);
    }

    // Target complementarity. The floor keeps mu from racing far below the
    // residual: once it does, the z/s weights make the reduced system so
    // ill-conditioned that the directions stop correcting infeasibility.
    double tau = sigma * mu;
    if (m > 0) tau = std::max(tau, std::min(mu, 1e-2 * infeas * (1.0 + std::abs(obj))));

    VectorXd dx, ds, dz, dy;
    const VectorXd rc =
        s.cwiseProduct(z) + dsa.cwiseProduct(dza) - VectorXd::Constant(m, tau);
    direction(rc, dx, ds, dz, dy);

    double alpha = std::min(step_to_boundary(s, ds), step_to_boundary(z, dz));
    alpha = std::min(1.0, 0.995 * alpha);
    if (trace)
      std::fprintf(stderr, "it %3d mu %9.2e kkt %9.2e obj %12.8f sig %8.2e alp %8.2e\n", iter,
                   mu, kkt, obj, sigma, alpha);
    if (alpha < 1e-11) {
      if (++stalls >= 3) break;
    } else {
      stalls = 0;
    }

    x += alpha * dx;
    s += alpha * ds;
    z += alpha * dz;
    if (p > 0) y += alpha * dy;
  }

  res.status = res.kkt_residual <= opt.accept ? SolveStatus::Optimal : SolveStatus::IterationLimit;
  return res;
}

// Problems with no inequality rows reduce to one linear solve.
LpQpResult solve_equality_only(const Scaled& w, const IpmOptions& opt) {
  const int n = static_cast<int>(w.c.size());
  const int p = static_cast<int>(w.A.rows());
  LpQpResult res;

  if (w.Q.size() > 0) {
    // KKT system [[Q, A'], [A, 0]] with a light diagonal shift.
    MatrixXd K = MatrixXd::Zero(n + p, n + p);
    K.topLeftCorner(n, n) = w.Q + 1e-12 * MatrixXd::Identity(n, n);
    if (p > 0) {
      K.topRightCorner(n, p) = w.A.transpose();
      K.bottomLeftCorner(p, n) = w.A;
      K.bottomRightCorner(p, p) = -1e-12 * MatrixXd::Identity(p, p);
    }
    VectorXd rhs(n + p);
    rhs.head(n) = -w.c;
    rhs.tail(p) = w.b;
    Eigen::FullPivLU<MatrixXd> lu(K);
    const VectorXd sol = lu.solve(rhs);
    const double resid = (K * sol - rhs).cwiseAbs().maxCoeff();
    if (!sol.allFinite() || resid > 1e-6 * (1.0 + rhs.cwiseAbs().maxCoeff())) {
      res.status = SolveStatus::Unbounded;
      return res;
    }
    res.x = sol.head(n);
    res.status = SolveStatus::Optimal;
    res.value = objective(w, res.x);
    res.kkt_residual = resid;
    return res;
  }

  // Pure LP: optimal iff c lies in the row space of A; then every feasible
  // point has the same value.
  VectorXd x = VectorXd::Zero(n);
  VectorXd grad = w.c;
  if (p > 0) {
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(w.A);
    x = cod.solve(w.b);
    if ((w.A * x - w.b).cwiseAbs().maxCoeff() > opt.feas_eps) {
      res.status = SolveStatus::Infeasible;
      return res;
    }
    Eigen::CompleteOrthogonalDecomposition<MatrixXd> codT(MatrixXd(w.A.transpose()));
    const VectorXd y = codT.solve(w.c);
    grad = w.c - w.A.transpose() * y;
  }
  if (grad.cwiseAbs().maxCoeff() > 1e-9 * (1.0 + w.c.cwiseAbs().maxCoeff())) {
    res.status = SolveStatus::Unbounded;
    return res;
  }
  res.x = x;
  res.status = SolveStatus::Optimal;
  res.value = objective(w, x);
  res.kkt_residual = 0.0;
  return res;
}

// Phase-1: minimize t subject to Gx - t <= h, |Ax - b| <= t, t >= -1. Always
// strictly feasible, always bounded; a positive optimum certifies that the
// original constraints have no solution.
LpQpResult phase1(const Scaled& w, const IpmOptions& opt, VectorXd& x_feas) {
  const int n = static_cast<int>(w.c.size());
  const int m = static_cast<int>(w.G.rows());
  const int p = static_cast<int>(w.A.rows());

  Scaled f;
  f.c = VectorXd::Zero(n + 1);
  f.c(n) = 1.0;
  f.G.resize(m + 2 * p + 1, n + 1);
  f.h.resize(m + 2 * p + 1);
  f.G.leftCols(n).topRows(m) = w.G;
  f.G.col(n).setConstant(-1.0);
  f.h.head(m) = w.h;
  if (p > 0) {
    f.G.block(m, 0, p, n) = w.A;
    f.h.segment(m, p) = w.b;
    f.G.block(m + p, 0, p, n) = -w.A;
    f.h.segment(m + p, p) = -w.b;
  }
  f.G.row(m + 2 * p).setZero();
  f.G(m + 2 * p, n) = -1.0;
  f.h(m + 2 * p) = 1.0;

  VectorXd x0 = VectorXd::Zero(n + 1);
  double viol = 0.0;
  if (m > 0) viol = std::max(viol, (-w.h).maxCoeff());
  if (p > 0) viol = std::max(viol, w.b.cwiseAbs().maxCoeff());
  x0(n) = viol + 1.0;

  IpmOptions popt = opt;
  popt.tol = std::min(opt.tol, 1e-9);
  LpQpResult r = ipm_core(f, x0, popt);
  if (r.status == SolveStatus::Optimal) x_feas = r.x.head(n);
  return r;
}

} // namespace

LpQpResult solve_lp_qp(const LpQpProblem& p, const IpmOptions& opt) {
  const int n = p.n();
  if (n <= 0) throw std::invalid_argument("solve_lp_qp: empty decision vector");
  if (p.Q.size() > 0 && (p.Q.rows() != n || p.Q.cols() != n))
    throw std::invalid_argument("solve_lp_qp: Q dimension mismatch");
  if (p.G.rows() != p.h.size() || (p.G.rows() > 0 && p.G.cols() != n))
    throw std::invalid_argument("solve_lp_qp: inequality dimension mismatch");
  if (p.A.rows() != p.b.size() || (p.A.rows() > 0 && p.A.cols() != n))
    throw std::invalid_argument("solve_lp_qp: equality dimension mismatch");

  Scaled w = scale_rows(p);
  LpQpResult res;
  if (w.trivially_infeasible) {
    res.status = SolveStatus::Infeasible;
    return res;
  }

  const int m = static_cast<int>(w.G.rows());
  if (m == 0) return solve_equality_only(w, opt);

  // A strictly interior origin lets us skip phase-1 when there are no
  // equality rows.
  VectorXd x0 = VectorXd::Zero(n);
  const bool origin_interior = w.A.rows() == 0 && w.h.minCoeff() > 1e-6;
  if (!origin_interior) {
    LpQpResult p1 = phase1(w, opt, x0);
    if (p1.status != SolveStatus::Optimal) {
      res.status = p1.status == SolveStatus::IterationLimit ? SolveStatus::IterationLimit
                                                            : SolveStatus::NumericalError;
      res.note = "phase-1 failed: " + std::string(to_string(p1.status));
      return res;
    }
    if (p1.value > opt.feas_eps) {
      res.status = SolveStatus::Infeasible;
      res.value = p1.value;
      return res;
    }
  }

  res = ipm_core(w, x0, opt);
  if (res.status == SolveStatus::Optimal) {
    // Report the true (unscaled) objective; row scaling leaves x unchanged.
    res.value = p.c.dot(res.x);
    if (p.Q.size() > 0) res.value += 0.5 * res.x.dot(p.Q * res.x);
  }
  return res;
}

} // namespace psulu
