#pragma once

#include <limits>
#include <string>

#include <Eigen/Core>

namespace psulu {

enum class SolveStatus { Optimal, Infeasible, Unbounded, IterationLimit, NumericalError };
const char* to_string(SolveStatus s);

// min 1/2 x'Qx + c'x  s.t.  G x <= h,  A x = b.
// Q empty (0x0) means a pure LP; A/b empty means no equality rows.
struct LpQpProblem {
  Eigen::MatrixXd Q;
  Eigen::VectorXd c;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  Eigen::MatrixXd A;
  Eigen::VectorXd b;

  int n() const { return static_cast<int>(c.size()); }
};

struct IpmOptions {
  double tol = 1e-9;      // target relative KKT residual
  double accept = 1e-8;   // residual still reported as optimal
  int max_iter = 120;
  double feas_eps = 1e-7; // phase-1 optimum above this certifies infeasibility
};

struct LpQpResult {
  SolveStatus status = SolveStatus::NumericalError;
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  double kkt_residual = std::numeric_limits<double>::infinity();
  std::string note;
};

// Dense primal-dual interior point (Mehrotra predictor-corrector) with a
// phase-1 feasibility solve certifying infeasible instances.
LpQpResult solve_lp_qp(const LpQpProblem& p, const IpmOptions& opt = {});

} // namespace psulu
