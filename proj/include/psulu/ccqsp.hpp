#pragma once

#include <string>
#include <vector>

#include "psulu/regions.hpp"

namespace psulu {

// Events are pure instants; index into Ccqsp::events is the id. Event 0 is
// the start event by convention and executes at step 0.
struct Event {
  std::string name;
};

struct Episode {
  enum Kind { StartIn, EndIn, RemainIn };
  std::string name;
  int start_event = 0;
  int end_event = 0;
  Kind kind = RemainIn;
  Region region;
};

// lb <= s(to) - s(from) <= ub, in seconds. ub may be +inf.
struct TemporalConstraint {
  int from = 0;
  int to = 0;
  double lb = 0.0;
  double ub = 0.0;
};

// Joint bound: Pr[any episode in `episodes` violated] <= delta.
struct ChanceConstraint {
  std::string name;
  std::vector<int> episodes;
  double delta = 0.0;
};

struct Ccqsp {
  std::vector<Event> events;
  std::vector<Episode> episodes;
  std::vector<TemporalConstraint> stcs;
  std::vector<ChanceConstraint> chance_constraints;
  int end_event = 0; // id of e_E; start is always event 0
};

// Assignment of steps to a subset of events; -1 marks unassigned.
struct PartialSchedule {
  std::vector<int> step;

  static PartialSchedule empty(int n_events) {
    PartialSchedule s;
    s.step.assign(n_events, -1);
    s.step[0] = 0;
    return s;
  }
  bool assigned(int e) const { return step[e] >= 0; }
  bool full() const {
    for (int t : step)
      if (t < 0) return false;
    return true;
  }
};

struct Violation {
  std::string rule;
  std::string subject;
};

// Structural validation; violations are data, valid plans return empty.
std::vector<Violation> validate_ccqsp(const Ccqsp& plan);

// Set of steps an episode constrains, given its endpoint steps.
std::vector<int> episode_time_steps(const Episode& ep, int t_S, int t_E);

// Episodes whose both endpoints are assigned under sigma.
std::vector<int> partial_episode_set(const Ccqsp& plan, const PartialSchedule& sigma);

// One clause per (episode, constrained step, conjunct); disjuncts carry the
// region half-spaces verbatim. Grouped per chance constraint in declaration
// order, clauses ordered by (episode, step, conjunct).
struct FlatClause {
  int episode = 0;
  int step = 0;
  int conjunct = 0;
  std::vector<HalfSpace> disjuncts;
};

struct FlatClauseSet {
  std::vector<std::vector<FlatClause>> per_cc;

  int total_clauses() const {
    int n = 0;
    for (const auto& v : per_cc) n += static_cast<int>(v.size());
    return n;
  }
};

// Flatten the episodes of every chance constraint, restricted to episodes
// with both endpoints assigned under sigma.
FlatClauseSet flatten_constraints(const Ccqsp& plan, const PartialSchedule& sigma);

} // namespace psulu
