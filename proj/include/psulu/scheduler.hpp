#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "psulu/ccqsp.hpp"
#include "psulu/nira.hpp"
#include "psulu/subproblem.hpp"
#include "psulu/temporal.hpp"

namespace psulu {

// Node of the schedule search tree: a partial schedule together with the
// distance graph re-closed after every assignment made so far. bound and
// exact are filled in when the node is visited.
struct ScheduleNode {
  PartialSchedule sigma;
  DGraph graph;
  double bound = -std::numeric_limits<double>::infinity();
  std::optional<SubSolution> exact; // present when the bound came from an exact solve
};

// Planner output: the chosen schedule and the control plan computed for it.
// risk_certificate[c] is the allocated risk mass (state deltas plus
// saturation epsilons) of chance constraint c; feasible plans keep it within
// the declared bound.
struct PlanSolution {
  SolveStatus status = SolveStatus::Infeasible;
  PartialSchedule schedule;
  std::vector<Eigen::VectorXd> controls;
  double objective = std::numeric_limits<double>::infinity();
  RiskAllocation alloc;
  std::vector<double> risk_certificate;
  std::string note;
  int nodes_visited = 0;
  int leaves_solved = 0;
  int pruned = 0;

  bool optimal() const { return status == SolveStatus::Optimal; }
};

// Children of a non-leaf node. The branching event is chosen
// convex-episode-first, then smallest feasible-step domain, then declaration
// order; children enumerate that event's feasible steps ascending, each with
// the event pinned in its copy of the distance graph. Assignments that would
// put an episode's start after its end are dead ends and are not generated.
std::vector<ScheduleNode> expand_schedule(const ScheduleNode& node, const Ccqsp& plan, double dt,
                                          int N);

// Lower bound over every completion of sigma, from the relaxation built on
// the episodes whose both endpoints are assigned. Solved exactly (full
// disjunctive search) when sigma is complete or a scheduled episode is
// non-convex; otherwise only the fixed-risk relaxation value is returned and
// the solution stays absent. End-time objectives add the schedule term: the
// assigned end step, or its current earliest feasible step as a lower bound.
std::pair<double, std::optional<SubSolution>> schedule_lower_bound(
    const Ccqsp& plan, const StochasticPlantModel& model, const FeedbackPolicy& policy,
    const InitialCondition& init, const Objective& objective, const PartialSchedule& sigma,
    const DGraph& graph, const std::vector<MeanEquality>& mean_eqs = {},
    const Config& cfg = {});

// Bound supplier for the schedule search; test doubles stand in for the real
// relaxation here.
struct ScheduleCallbacks {
  std::function<std::pair<double, std::optional<SubSolution>>(const ScheduleNode&)> bound;
  std::function<void(const ScheduleNode&, bool is_leaf, bool pruned)> observer; // optional
};

// Depth-first branch and bound over schedules. A node is pruned when its
// bound cannot beat the incumbent by more than the pruning slack; incumbents
// come only from exactly solved full schedules.
PlanSolution schedule_search(const Ccqsp& plan, const DGraph& root_graph, double dt, int N,
                             const ScheduleCallbacks& cb, const Config& cfg = {});

// Full planner: validates the plan (throws std::invalid_argument on
// structural violations), checks temporal consistency and per-event step
// domains with diagnoses in the note, then searches schedules with
// schedule_lower_bound driving the pruning. mean_eqs pins rows of the nominal
// state at fixed steps (waypoints, terminal conditions) in every subproblem.
PlanSolution psulu_plan(const Ccqsp& plan, const StochasticPlantModel& model,
                        const FeedbackPolicy& policy, const InitialCondition& init,
                        const Objective& objective, const std::vector<MeanEquality>& mean_eqs = {},
                        const Config& cfg = {});

} // namespace psulu
