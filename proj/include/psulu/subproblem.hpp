#pragma once

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "psulu/ccqsp.hpp"
#include "psulu/config.hpp"
#include "psulu/dynamics.hpp"
#include "psulu/risk.hpp"
#include "psulu/solver.hpp"

namespace psulu {

// Plan cost over the nominal controls. EndTime is schedule-determined, so the
// fixed-schedule solve treats it as a pure feasibility problem.
struct Objective {
  enum class Kind { ManhattanControl, LinearControl, QuadraticExpectedControl, EndTime };
  Kind kind = Kind::ManhattanControl;
  double weight = 1.0;    // scale for the manhattan / quadratic kinds
  Eigen::VectorXd linear; // stacked coefficients (step-major) for LinearControl
};

// Pin rows of the nominal state at one step: H xbar_step = g.
struct MeanEquality {
  int step = 0;
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
};

// A fixed-schedule convex subproblem. Clauses come flattened per chance
// constraint; `selected` picks one disjunct per clause in scope (-1 leaves a
// clause out, as branch-and-bound does above the leaves). Out-of-scope
// clauses impose nothing but still set each budget's saturation horizon.
struct Subproblem {
  const StochasticPlantModel* plant = nullptr;
  FeedbackPolicy policy;
  InitialCondition init;
  FlatClauseSet clauses;
  std::vector<std::vector<int>> selected;
  std::vector<double> delta_cap;
  Objective objective;
  std::vector<MeanEquality> mean_eqs;

  int n_cc() const { return static_cast<int>(clauses.per_cc.size()); }
  bool open_loop() const { return !policy.closed_loop(); }
  // Every clause carrying a selected disjunct.
  int scope_size(int c) const;
  // Largest constrained step of chance constraint c, clamped to N-1; -1 when
  // the constraint has no flattened clauses.
  int horizon_cap(int c) const;
};

struct SubSolution {
  SolveStatus status = SolveStatus::NumericalError;
  double objective = std::numeric_limits<double>::infinity();
  std::vector<Eigen::VectorXd> controls; // ubar_0..ubar_{N-1}
  RiskAllocation alloc;
  std::vector<std::vector<bool>> state_active; // tight clause constraints (in-scope only)
  int ira_iterations = 0;
  std::string note;

  bool optimal() const { return status == SolveStatus::Optimal; }
};

// Uniform starting allocation: share `state_risk_share` of each budget over
// the in-scope clauses, the remainder over the saturation entries inside the
// budget horizons (closed loop only).
RiskAllocation initial_allocation(const Subproblem& sub, const Config& cfg = {});

// The pre-allocation comparator: spread each budget's state share over every
// disjunct of every clause of the constraint, as planners without risk
// reallocation did. Each clause then carries one disjunct's worth, which
// makes the margins uniformly wide and the plan much more conservative than
// a reallocated one.
RiskAllocation baseline_allocation(const Subproblem& sub, const Config& cfg = {});

// Loosest allocation any budget-feasible point could use: every delta at the
// full budget, every saturation entry at the smallest covering budget. Used
// with the budget rows dropped, this relaxes the subproblem.
RiskAllocation relaxed_allocation(const Subproblem& sub);

// Solve with the allocation held fixed (margins become constants).
SubSolution solve_fixed_risk(const Subproblem& sub, const RiskAllocation& alloc,
                             const Config& cfg = {});

// Iterative risk allocation: alternate fixed-risk solves with a reallocation
// that shrinks inactive risks toward their measured values and hands the
// freed budget to active ones. Feasible iterates, non-increasing objective.
SubSolution solve_subproblem_ira(const Subproblem& sub, const Config& cfg = {});

// Fixed risk relaxation: solve once at relaxed_allocation with budgets
// ignored. The value lower-bounds every feasible point of the subproblem, and
// infeasibility here certifies the subproblem infeasible.
SubSolution solve_frr(const Subproblem& sub, const Config& cfg = {});

} // namespace psulu
