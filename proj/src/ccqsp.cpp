#include "psulu/ccqsp.hpp"

#include <algorithm>
#include <stdexcept>

namespace psulu {

std::vector<Violation> validate_ccqsp(const Ccqsp& plan) {
  std::vector<Violation> out;
  const int n_events = static_cast<int>(plan.events.size());
  const int n_episodes = static_cast<int>(plan.episodes.size());

  if (n_events == 0) {
    out.push_back({"plan must declare events", "events"});
    return out;
  }
  if (plan.end_event < 0 || plan.end_event >= n_events)
    out.push_back({"end event id does not resolve", "e_E"});

  auto event_ok = [&](int e) { return e >= 0 && e < n_events; };

  for (int a = 0; a < n_episodes; ++a) {
    const Episode& ep = plan.episodes[a];
    if (!event_ok(ep.start_event) || !event_ok(ep.end_event))
      out.push_back({"episode references an unknown event", ep.name});
    if (ep.kind == Episode::RemainIn && ep.start_event == ep.end_event)
      out.push_back({"remain-in episode needs distinct endpoint events", ep.name});
    if (ep.region.cnf.empty()) out.push_back({"episode region is empty", ep.name});
    for (const auto& dis : ep.region.cnf)
      if (dis.empty()) {
        out.push_back({"region has an empty disjunction", ep.name});
        break;
      }
  }

  std::vector<int> owner(n_episodes, -1);
  for (size_t c = 0; c < plan.chance_constraints.size(); ++c) {
    const ChanceConstraint& cc = plan.chance_constraints[c];
    if (!(cc.delta > 0.0 && cc.delta <= 0.5))
      out.push_back({"risk bound must lie in (0, 0.5]", cc.name});
    for (int a : cc.episodes) {
      if (a < 0 || a >= n_episodes) {
        out.push_back({"chance constraint references an unknown episode", cc.name});
        continue;
      }
      if (owner[a] >= 0)
        out.push_back({"episode appears in more than one chance constraint",
                       plan.episodes[a].name});
      owner[a] = static_cast<int>(c);
    }
  }
  for (int a = 0; a < n_episodes; ++a)
    if (owner[a] < 0)
      out.push_back({"episode belongs to no chance constraint", plan.episodes[a].name});

  for (const TemporalConstraint& stc : plan.stcs) {
    if (!event_ok(stc.from) || !event_ok(stc.to))
      out.push_back({"temporal constraint references an unknown event", "stc"});
    if (!(stc.lb <= stc.ub))
      out.push_back({"temporal constraint has lower bound above upper bound", "stc"});
  }
  return out;
}

std::vector<int> episode_time_steps(const Episode& ep, int t_S, int t_E) {
  if (t_S > t_E) throw std::invalid_argument("episode_time_steps: start step after end step");
  switch (ep.kind) {
    case Episode::StartIn:
      return {t_S};
    case Episode::EndIn:
      return {t_E};
    case Episode::RemainIn: {
      std::vector<int> ts;
      ts.reserve(t_E - t_S + 1);
      for (int t = t_S; t <= t_E; ++t) ts.push_back(t);
      return ts;
    }
  }
  return {};
}

std::vector<int> partial_episode_set(const Ccqsp& plan, const PartialSchedule& sigma) {
  std::vector<int> out;
  for (size_t a = 0; a < plan.episodes.size(); ++a) {
    const Episode& ep = plan.episodes[a];
    if (sigma.assigned(ep.start_event) && sigma.assigned(ep.end_event))
      out.push_back(static_cast<int>(a));
  }
  return out;
}

FlatClauseSet flatten_constraints(const Ccqsp& plan, const PartialSchedule& sigma) {
  FlatClauseSet flat;
  flat.per_cc.resize(plan.chance_constraints.size());
  std::vector<int> in_scope = partial_episode_set(plan, sigma);
  std::vector<char> scoped(plan.episodes.size(), 0);
  for (int a : in_scope) scoped[a] = 1;

  for (size_t c = 0; c < plan.chance_constraints.size(); ++c) {
    std::vector<int> members = plan.chance_constraints[c].episodes;
    std::sort(members.begin(), members.end());
    for (int a : members) {
      if (!scoped[a]) continue;
      const Episode& ep = plan.episodes[a];
      for (int t : episode_time_steps(ep, sigma.step[ep.start_event], sigma.step[ep.end_event])) {
        for (size_t k = 0; k < ep.region.cnf.size(); ++k) {
          FlatClause cl;
          cl.episode = a;
          cl.step = t;
          cl.conjunct = static_cast<int>(k);
          cl.disjuncts = ep.region.cnf[k];
          flat.per_cc[c].push_back(std::move(cl));
        }
      }
    }
  }
  return flat;
}

} // namespace psulu
