#include "psulu/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace psulu {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// An event is in the convex-first class when every episode it bounds has a
// convex region.
bool convex_only(const Ccqsp& plan, int e) {
  for (const Episode& ep : plan.episodes)
    if ((ep.start_event == e || ep.end_event == e) && !ep.region.convex()) return false;
  return true;
}

int pick_event(const ScheduleNode& node, const Ccqsp& plan, double dt, int N) {
  int best = -1;
  bool best_cef = false;
  size_t best_dom = 0;
  for (int e = 0; e < static_cast<int>(plan.events.size()); ++e) {
    if (node.sigma.assigned(e)) continue;
    const bool cef = convex_only(plan, e);
    const size_t dom = node.graph.feasible_steps(e, dt, N).size();
    const bool better =
        best < 0 || (cef && !best_cef) || (cef == best_cef && dom < best_dom);
    if (better) {
      best = e;
      best_cef = cef;
      best_dom = dom;
    }
  }
  return best;
}

// Completing this assignment must keep every episode's start at or before
// its end; the relaxation cannot even be stated otherwise.
bool ordering_ok(const Ccqsp& plan, const PartialSchedule& sigma) {
  for (const Episode& ep : plan.episodes) {
    if (!sigma.assigned(ep.start_event) || !sigma.assigned(ep.end_event)) continue;
    if (sigma.step[ep.start_event] > sigma.step[ep.end_event]) return false;
  }
  return true;
}

} // namespace

std::vector<ScheduleNode> expand_schedule(const ScheduleNode& node, const Ccqsp& plan, double dt,
                                          int N) {
  std::vector<ScheduleNode> children;
  if (node.sigma.full()) return children;
  const int e = pick_event(node, plan, dt, N);
  for (int t : node.graph.feasible_steps(e, dt, N)) {
    ScheduleNode child;
    child.sigma = node.sigma;
    child.sigma.step[e] = t;
    if (!ordering_ok(plan, child.sigma)) continue;
    child.graph = node.graph.fix_event(e, t, dt);
    if (!child.graph.consistent()) continue;
    children.push_back(std::move(child));
  }
  return children;
}

std::pair<double, std::optional<SubSolution>> schedule_lower_bound(
    const Ccqsp& plan, const StochasticPlantModel& model, const FeedbackPolicy& policy,
    const InitialCondition& init, const Objective& objective, const PartialSchedule& sigma,
    const DGraph& graph, const std::vector<MeanEquality>& mean_eqs, const Config& cfg) {
  Subproblem sub;
  sub.plant = &model;
  sub.policy = policy;
  sub.init = init;
  sub.objective = objective;
  sub.clauses = flatten_constraints(plan, sigma);
  sub.selected.clear();
  for (const auto& clauses : sub.clauses.per_cc)
    sub.selected.emplace_back(clauses.size(), -1);
  sub.delta_cap.clear();
  for (const ChanceConstraint& cc : plan.chance_constraints) sub.delta_cap.push_back(cc.delta);
  sub.mean_eqs = mean_eqs;

  // Schedule term of the objective: known once the end event is assigned, and
  // bounded below by its earliest feasible step until then. Assignments only
  // tighten the graph, so the bound stays admissible along every branch.
  double schedule_term = 0.0;
  if (objective.kind == Objective::Kind::EndTime) {
    const int end = plan.end_event;
    if (sigma.assigned(end)) {
      schedule_term = objective.weight * sigma.step[end] * model.dt;
    } else {
      const auto domain = graph.feasible_steps(end, model.dt, model.N);
      if (domain.empty()) return {kInf, std::nullopt};
      schedule_term = objective.weight * domain.front() * model.dt;
    }
  }

  bool nonconvex_scope = false;
  for (int a : partial_episode_set(plan, sigma))
    if (!plan.episodes[static_cast<size_t>(a)].region.convex()) nonconvex_scope = true;

  if (sigma.full() || nonconvex_scope) {
    NiraResult r = nira_plan(sub, cfg);
    if (r.best.status == SolveStatus::Infeasible) return {kInf, std::nullopt};
    if (!r.best.optimal()) return {-kInf, std::nullopt};
    SubSolution sol = std::move(r.best);
    sol.objective += schedule_term;
    const double bound = sol.objective;
    return {bound, std::move(sol)};
  }

  const SubSolution relaxed = solve_frr(sub, cfg);
  if (relaxed.status == SolveStatus::Infeasible) return {kInf, std::nullopt};
  if (!relaxed.optimal()) return {-kInf, std::nullopt};
  return {relaxed.objective + schedule_term, std::nullopt};
}

PlanSolution schedule_search(const Ccqsp& plan, const DGraph& root_graph, double dt, int N,
                             const ScheduleCallbacks& cb, const Config& cfg) {
  PlanSolution out;
  double incumbent = kInf;
  SubSolution best_sol;
  PartialSchedule best_sigma;

  const auto cut_off = [&](double lb) {
    if (std::isinf(incumbent)) return std::isinf(lb) && lb > 0.0;
    return lb >= incumbent - std::max(cfg.prune_eps, cfg.prune_rel * (1.0 + std::abs(incumbent)));
  };

  std::vector<ScheduleNode> stack;
  {
    ScheduleNode root;
    root.sigma = PartialSchedule::empty(static_cast<int>(plan.events.size()));
    root.graph = root_graph;
    stack.push_back(std::move(root));
  }

  while (!stack.empty()) {
    ScheduleNode node = std::move(stack.back());
    stack.pop_back();
    ++out.nodes_visited;

    auto [bound, exact] = cb.bound(node);
    node.bound = bound;
    node.exact = std::move(exact);
    const bool leaf = node.sigma.full();
    if (cut_off(bound)) {
      ++out.pruned;
      if (cb.observer) cb.observer(node, leaf, true);
      continue;
    }
    if (cb.observer) cb.observer(node, leaf, false);

    if (leaf) {
      ++out.leaves_solved;
      if (node.exact && node.exact->optimal() && node.exact->objective < incumbent) {
        incumbent = node.exact->objective;
        best_sol = *node.exact;
        best_sigma = node.sigma;
        out.status = SolveStatus::Optimal;
      }
      continue;
    }
    auto children = expand_schedule(node, plan, dt, N);
    for (auto it = children.rbegin(); it != children.rend(); ++it)
      stack.push_back(std::move(*it));
  }

  if (out.optimal()) {
    out.schedule = best_sigma;
    out.controls = best_sol.controls;
    out.objective = incumbent;
    out.alloc = best_sol.alloc;
    for (size_t c = 0; c < best_sol.alloc.delta.size(); ++c)
      out.risk_certificate.push_back(best_sol.alloc.budget_lhs(static_cast<int>(c)));
    out.note = best_sol.note;
  } else {
    out.note = "no feasible schedule admits a plan";
  }
  return out;
}

PlanSolution psulu_plan(const Ccqsp& plan, const StochasticPlantModel& model,
                        const FeedbackPolicy& policy, const InitialCondition& init,
                        const Objective& objective, const std::vector<MeanEquality>& mean_eqs,
                        const Config& cfg) {
  const auto violations = validate_ccqsp(plan);
  if (!violations.empty())
    throw std::invalid_argument("psulu_plan: " + violations.front().rule + " (" +
                                violations.front().subject + ")");

  const auto base = DistanceGraph::from_stcs(static_cast<int>(plan.events.size()), plan.stcs);
  DGraph graph = compute_dgraph(base, cfg.stn_tol);
  if (graph.consistent()) graph = graph.fix_event(0, 0, model.dt);
  if (!graph.consistent()) {
    PlanSolution out;
    out.note = "temporal constraints are inconsistent (negative cycle in the distance graph)";
    return out;
  }
  for (int e = 0; e < static_cast<int>(plan.events.size()); ++e) {
    if (graph.feasible_steps(e, model.dt, model.N).empty()) {
      PlanSolution out;
      out.note = "event '" + plan.events[static_cast<size_t>(e)].name +
                 "' has no feasible time step; shrink the discretization interval or extend "
                 "the horizon";
      return out;
    }
  }

  ScheduleCallbacks cb;
  cb.bound = [&](const ScheduleNode& node) {
    return schedule_lower_bound(plan, model, policy, init, objective, node.sigma, node.graph,
                                mean_eqs, cfg);
  };
  return schedule_search(plan, graph, model.dt, model.N, cb, cfg);
}

} // namespace psulu
