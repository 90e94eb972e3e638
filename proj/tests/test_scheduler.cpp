#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "psulu/dynamics.hpp"
#include "psulu/scheduler.hpp"

using namespace psulu;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

// start -> mid in [1,3], mid -> finish in [2,3], start -> finish in [0,5]
Ccqsp three_events() {
  Ccqsp p;
  p.events = {{"start"}, {"mid"}, {"finish"}};
  p.end_event = 2;
  p.stcs = {{0, 1, 1.0, 3.0}, {1, 2, 2.0, 3.0}, {0, 2, 0.0, 5.0}};
  return p;
}

DGraph closed_graph(const Ccqsp& p, double dt) {
  auto g = compute_dgraph(DistanceGraph::from_stcs(static_cast<int>(p.events.size()), p.stcs));
  REQUIRE(g.consistent());
  return g.fix_event(0, 0, dt);
}

void check_stcs(const Ccqsp& plan, const PartialSchedule& s, double dt) {
  REQUIRE(s.full());
  for (const auto& stc : plan.stcs) {
    const double gap = (s.step[stc.to] - s.step[stc.from]) * dt;
    CHECK(gap >= stc.lb - 1e-9);
    if (std::isfinite(stc.ub)) CHECK(gap <= stc.ub + 1e-9);
  }
}

// every full schedule consistent with the temporal constraints
std::vector<PartialSchedule> all_schedules(const Ccqsp& plan, double dt, int N) {
  const int n = static_cast<int>(plan.events.size());
  std::vector<PartialSchedule> out;
  PartialSchedule s = PartialSchedule::empty(n);
  std::function<void(int)> rec = [&](int e) {
    if (e == n) {
      for (const auto& stc : plan.stcs) {
        const double gap = (s.step[stc.to] - s.step[stc.from]) * dt;
        if (gap < stc.lb - 1e-9) return;
        if (std::isfinite(stc.ub) && gap > stc.ub + 1e-9) return;
      }
      for (const auto& ep : plan.episodes)
        if (s.step[ep.start_event] > s.step[ep.end_event]) return;
      out.push_back(s);
      return;
    }
    for (int t = 0; t <= N; ++t) {
      s.step[e] = t;
      rec(e + 1);
    }
  };
  rec(1);
  return out;
}

Subproblem at_schedule(const Ccqsp& plan, const StochasticPlantModel& model,
                       const FeedbackPolicy& policy, const InitialCondition& init,
                       const Objective& objective, const PartialSchedule& sigma) {
  Subproblem sub;
  sub.plant = &model;
  sub.policy = policy;
  sub.init = init;
  sub.objective = objective;
  sub.clauses = flatten_constraints(plan, sigma);
  for (const auto& clauses : sub.clauses.per_cc)
    sub.selected.emplace_back(clauses.size(), -1);
  for (const auto& cc : plan.chance_constraints) sub.delta_cap.push_back(cc.delta);
  return sub;
}

} // namespace

TEST_CASE("scripted bounds reproduce the expected search, incumbent, and pruning") {
  const Ccqsp plan = three_events();
  const DGraph root = closed_graph(plan, 1.0);

  std::vector<std::vector<int>> bounded; // sigma vectors handed to the bound callback
  ScheduleCallbacks cb;
  cb.bound = [&](const ScheduleNode& n) -> std::pair<double, std::optional<SubSolution>> {
    bounded.push_back(n.sigma.step);
    const int s1 = n.sigma.step[1];
    const int s2 = n.sigma.step[2];
    if (s1 < 0) return {0.0, std::nullopt};
    if (s1 == 1) return {kInf, std::nullopt}; // relaxation infeasible
    if (s2 < 0) return {s1 == 2 ? 6.0 : 9.0, std::nullopt};
    SubSolution sol;
    sol.status = SolveStatus::Optimal;
    sol.objective = (s2 == 4) ? 10.0 : 8.0;
    return {sol.objective, sol};
  };

  const PlanSolution r = schedule_search(plan, root, 1.0, 5, cb);
  REQUIRE(r.optimal());
  CHECK(r.objective == doctest::Approx(8.0));
  CHECK(r.schedule.step == std::vector<int>{0, 2, 5});
  CHECK(r.nodes_visited == 6); // root, three mid choices, two leaves
  CHECK(r.leaves_solved == 2);
  CHECK(r.pruned == 2); // infeasible mid=1, dominated mid=3

  // the dominated branch was bounded once and never expanded
  int mid3_bounds = 0;
  for (const auto& s : bounded) {
    if (s[1] == 3) {
      ++mid3_bounds;
      CHECK(s[2] == -1);
    }
  }
  CHECK(mid3_bounds == 1);
}

TEST_CASE("expansion enumerates feasible steps ascending at each level") {
  const Ccqsp plan = three_events();
  ScheduleNode root;
  root.sigma = PartialSchedule::empty(3);
  root.graph = closed_graph(plan, 1.0);

  const auto level1 = expand_schedule(root, plan, 1.0, 5);
  REQUIRE(level1.size() == 3);
  for (size_t i = 0; i < level1.size(); ++i) {
    CHECK(level1[i].sigma.step[1] == static_cast<int>(i) + 1);
    CHECK(level1[i].sigma.step[2] == -1);
  }

  const auto level2 = expand_schedule(level1[1], plan, 1.0, 5);
  REQUIRE(level2.size() == 2);
  CHECK(level2[0].sigma.step[2] == 4);
  CHECK(level2[1].sigma.step[2] == 5);
}

TEST_CASE("events touching only convex episodes branch before obstacle events") {
  Ccqsp plan;
  plan.events = {{"start"}, {"convex"}, {"obstacle"}};
  plan.end_event = 2;
  plan.stcs = {{0, 1, 0.0, 4.0}, {0, 2, 1.0, 2.0}};

  Episode goal;
  goal.name = "goal";
  goal.start_event = 0;
  goal.end_event = 1;
  goal.kind = Episode::EndIn;
  goal.region = box_region(0.5, 1.5, 0.5, 1.5, 4);
  Episode avoid;
  avoid.name = "avoid";
  avoid.start_event = 0;
  avoid.end_event = 2;
  avoid.kind = Episode::EndIn;
  avoid.region = obstacle_region(0.2, 0.4, 0.2, 0.4, 4);
  plan.episodes = {goal, avoid};
  plan.chance_constraints = {{"cc-goal", {0}, 0.05}, {"cc-avoid", {1}, 0.05}};

  ScheduleNode root;
  root.sigma = PartialSchedule::empty(3);
  root.graph = closed_graph(plan, 1.0);

  // the obstacle event has the smaller domain (2 steps vs 5) yet loses to
  // the convex-episode-first rule
  const auto children = expand_schedule(root, plan, 1.0, 4);
  REQUIRE(!children.empty());
  for (const auto& c : children) {
    CHECK(c.sigma.assigned(1));
    CHECK(!c.sigma.assigned(2));
  }
}

TEST_CASE("a single feasible schedule reduces to the clause solve at that schedule") {
  auto di = double_integrator(1.0, 0.02, 2.0, 5.0, 8);
  di.model.N = 5;

  Ccqsp plan;
  plan.events = {{"start"}, {"mid"}, {"finish"}};
  plan.end_event = 2;
  plan.stcs = {{0, 1, 2.0, 2.0}, {1, 2, 3.0, 3.0}};
  Episode goal;
  goal.name = "goal";
  goal.start_event = 0;
  goal.end_event = 2;
  goal.kind = Episode::EndIn;
  goal.region = box_region(0.8, 1.5, 0.8, 1.5, 4);
  plan.episodes = {goal};
  plan.chance_constraints = {{"cc", {0}, 0.01}};

  InitialCondition init;
  init.mean = VectorXd::Zero(4);
  init.cov = MatrixXd::Zero(4, 4);
  Objective obj; // Manhattan control effort

  const PlanSolution r = psulu_plan(plan, di.model, {}, init, obj);
  REQUIRE(r.optimal());
  CHECK(r.schedule.step == std::vector<int>{0, 2, 5});
  check_stcs(plan, r.schedule, di.model.dt);

  const Subproblem sub = at_schedule(plan, di.model, {}, init, obj, r.schedule);
  const NiraResult direct = nira_plan(sub);
  REQUIRE(direct.best.optimal());
  CHECK(r.objective == doctest::Approx(direct.best.objective).epsilon(1e-7));

  REQUIRE(r.risk_certificate.size() == 1);
  CHECK(r.risk_certificate[0] <= 0.01 + 1e-9);
  CHECK(static_cast<int>(r.controls.size()) == di.model.N);
}

TEST_CASE("search result matches brute force over every feasible schedule") {
  std::mt19937 rng(41);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> span(0, 2);

  int compared = 0, feasible = 0;
  for (int trial = 0; trial < 12; ++trial) {
    auto di = double_integrator(1.0, (trial % 2) ? 0.02 : 0.0, 2.0, 5.0, 8);
    di.model.N = 6;

    const int n_events = 3 + coin(rng);
    Ccqsp plan;
    for (int e = 0; e < n_events; ++e) plan.events.push_back({"e" + std::to_string(e)});
    plan.end_event = n_events - 1;
    for (int e = 0; e + 1 < n_events; ++e) {
      const double lb = 1.0 + coin(rng);
      plan.stcs.push_back({e, e + 1, lb, lb + span(rng)});
    }
    if (coin(rng)) plan.stcs.push_back({0, n_events - 1, 0.0, 4.0 + span(rng)});

    Episode goal;
    goal.name = "goal";
    goal.start_event = 0;
    goal.end_event = n_events - 1;
    goal.kind = Episode::EndIn;
    const double cx = coin(rng) ? 0.6 : 1.0;
    goal.region = box_region(cx - 0.35, cx + 0.35, cx - 0.35, cx + 0.35, 4);
    plan.episodes = {goal};
    plan.chance_constraints = {{"cc-goal", {0}, 0.02}};
    if (coin(rng) == 0) {
      Episode avoid;
      avoid.name = "avoid";
      avoid.start_event = 0;
      avoid.end_event = 1;
      avoid.kind = Episode::EndIn;
      avoid.region = obstacle_region(0.1, 0.45, 0.1, 0.45, 4);
      plan.episodes.push_back(avoid);
      plan.chance_constraints.push_back({"cc-avoid", {1}, 0.05});
    }

    InitialCondition init;
    init.mean = VectorXd::Zero(4);
    init.cov = MatrixXd::Zero(4, 4);
    Objective obj;

    auto g = compute_dgraph(
        DistanceGraph::from_stcs(static_cast<int>(plan.events.size()), plan.stcs));
    if (!g.consistent()) continue;

    double best = kInf;
    for (const auto& s : all_schedules(plan, di.model.dt, di.model.N)) {
      const Subproblem sub = at_schedule(plan, di.model, {}, init, obj, s);
      const NiraResult r = nira_plan(sub);
      if (r.best.optimal()) best = std::min(best, r.best.objective);
    }

    const PlanSolution r = psulu_plan(plan, di.model, {}, init, obj);
    ++compared;
    if (std::isfinite(best)) {
      ++feasible;
      REQUIRE(r.optimal());
      CHECK(r.objective == doctest::Approx(best).epsilon(1e-5));
      check_stcs(plan, r.schedule, di.model.dt);
    } else {
      CHECK(!r.optimal());
    }
  }
  CHECK(compared >= 10);
  CHECK(feasible >= 5);
}

TEST_CASE("partial-schedule bounds never exceed the value of any extension") {
  auto di = double_integrator(1.0, 0.02, 2.0, 5.0, 8);
  di.model.N = 6;

  Ccqsp plan;
  plan.events = {{"e0"}, {"e1"}, {"e2"}};
  plan.end_event = 2;
  plan.stcs = {{0, 1, 1.0, 3.0}, {1, 2, 1.0, 3.0}};
  Episode avoid;
  avoid.name = "avoid";
  avoid.start_event = 0;
  avoid.end_event = 1;
  avoid.kind = Episode::EndIn;
  avoid.region = obstacle_region(0.1, 0.5, 0.1, 0.5, 4);
  Episode goal;
  goal.name = "goal";
  goal.start_event = 0;
  goal.end_event = 2;
  goal.kind = Episode::EndIn;
  goal.region = box_region(0.7, 1.3, 0.7, 1.3, 4);
  plan.episodes = {avoid, goal};
  plan.chance_constraints = {{"cc-avoid", {0}, 0.05}, {"cc-goal", {1}, 0.02}};

  InitialCondition init;
  init.mean = VectorXd::Zero(4);
  init.cov = MatrixXd::Zero(4, 4);
  Objective obj;
  const DGraph root_graph = closed_graph(plan, di.model.dt);

  ScheduleNode root;
  root.sigma = PartialSchedule::empty(3);
  root.graph = root_graph;

  int checked = 0;
  std::function<void(const ScheduleNode&)> walk = [&](const ScheduleNode& node) {
    const auto [bound, exact] =
        schedule_lower_bound(plan, di.model, {}, init, obj, node.sigma, node.graph);
    if (node.sigma.full()) return;
    for (const auto& child : expand_schedule(node, plan, di.model.dt, di.model.N)) {
      // every full extension of this node must cost at least the node's bound
      std::vector<ScheduleNode> frontier{child};
      while (!frontier.empty()) {
        ScheduleNode cur = frontier.back();
        frontier.pop_back();
        if (cur.sigma.full()) {
          const auto [leaf_value, leaf_exact] =
              schedule_lower_bound(plan, di.model, {}, init, obj, cur.sigma, cur.graph);
          if (leaf_exact && leaf_exact->optimal()) {
            CHECK(bound <= leaf_value + 1e-6);
            ++checked;
          }
          continue;
        }
        for (auto& g : expand_schedule(cur, plan, di.model.dt, di.model.N))
          frontier.push_back(std::move(g));
      }
      walk(child);
    }
  };
  walk(root);
  CHECK(checked >= 10);
}

TEST_CASE("temporal dead ends come back with a diagnosis") {
  auto di = double_integrator(1.0, 0.0, 2.0, 5.0, 8);
  di.model.N = 5;
  InitialCondition init;
  init.mean = VectorXd::Zero(4);
  init.cov = MatrixXd::Zero(4, 4);

  Ccqsp plan;
  plan.events = {{"start"}, {"finish"}};
  plan.end_event = 1;
  Episode goal;
  goal.name = "goal";
  goal.start_event = 0;
  goal.end_event = 1;
  goal.kind = Episode::EndIn;
  goal.region = box_region(-1.0, 1.0, -1.0, 1.0, 4);
  plan.episodes = {goal};
  plan.chance_constraints = {{"cc", {0}, 0.05}};

  SUBCASE("contradictory windows") {
    plan.stcs = {{0, 1, 4.0, 5.0}, {0, 1, 1.0, 2.0}};
    const PlanSolution r = psulu_plan(plan, di.model, {}, init, {});
    CHECK(!r.optimal());
    CHECK(r.note.find("temporal") != std::string::npos);
  }
  SUBCASE("window misses every grid step") {
    plan.stcs = {{0, 1, 0.3, 0.4}};
    const PlanSolution r = psulu_plan(plan, di.model, {}, init, {});
    CHECK(!r.optimal());
    CHECK(r.note.find("shrink") != std::string::npos);
  }
  SUBCASE("structurally invalid plans throw") {
    plan.stcs = {{0, 1, 0.0, 5.0}};
    plan.chance_constraints[0].delta = 0.7;
    CHECK_THROWS_AS(psulu_plan(plan, di.model, {}, init, {}), std::invalid_argument);
  }
}

TEST_CASE("end-time objective reaches the goal at the first schedulable step") {
  auto di = double_integrator(1.0, 0.0, 0.3, 5.0, 8);
  di.model.N = 8;

  Ccqsp plan;
  plan.events = {{"start"}, {"finish"}};
  plan.end_event = 1;
  plan.stcs = {{0, 1, 0.0, 8.0}};
  Episode goal;
  goal.name = "goal";
  goal.start_event = 0;
  goal.end_event = 1;
  goal.kind = Episode::EndIn;
  goal.region = box_region(0.9, 1.1, 0.9, 1.1, 4);
  plan.episodes = {goal};
  plan.chance_constraints = {{"cc", {0}, 0.05}};

  InitialCondition init;
  init.mean = VectorXd::Zero(4);
  init.cov = MatrixXd::Zero(4, 4);
  Objective obj;
  obj.kind = Objective::Kind::EndTime;
  obj.weight = 1.0;

  // earliest reachable step, found by scanning end assignments in order
  int expected = -1;
  for (int t = 0; t <= di.model.N && expected < 0; ++t) {
    PartialSchedule s = PartialSchedule::empty(2);
    s.step[1] = t;
    const Subproblem sub = at_schedule(plan, di.model, {}, init, obj, s);
    if (nira_plan(sub).best.optimal()) expected = t;
  }
  REQUIRE(expected > 0);

  const PlanSolution r = psulu_plan(plan, di.model, {}, init, obj);
  REQUIRE(r.optimal());
  CHECK(r.schedule.step[1] == expected);
  CHECK(r.objective == doctest::Approx(expected * di.model.dt).epsilon(1e-7));
  check_stcs(plan, r.schedule, di.model.dt);
}
