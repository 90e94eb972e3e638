#include "psulu/nira.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>

namespace psulu {

NiraResult nira_search(const std::vector<int>& fanout, const NiraCallbacks& cb,
                       const Config& cfg) {
  NiraResult res;
  res.best.status = SolveStatus::Infeasible;
  double incumbent = std::numeric_limits<double>::infinity();

  // The slack absorbs interior-point noise in the bound values; without the
  // relative part, equal-cost selections (common under symmetric obstacle
  // geometry) all get explored and the tree blows up.
  const auto cut_off = [&](double lb) {
    if (std::isinf(incumbent)) return std::isinf(lb) && lb > 0.0;
    return lb >= incumbent - std::max(cfg.prune_eps, cfg.prune_rel * (1.0 + std::abs(incumbent)));
  };

  std::vector<std::vector<int>> stack;
  stack.push_back({});
  while (!stack.empty()) {
    const std::vector<int> sel = std::move(stack.back());
    stack.pop_back();
    ++res.nodes_visited;

    if (sel.size() == fanout.size()) {
      if (cb.leaf_bound && cut_off(cb.leaf_bound(sel))) {
        ++res.pruned;
        if (cb.observer) cb.observer(sel, true, true);
        continue;
      }
      if (cb.observer) cb.observer(sel, true, false);
      SubSolution sol = cb.leaf_solve(sel);
      ++res.leaves_solved;
      if (sol.optimal() && sol.objective < incumbent) {
        incumbent = sol.objective;
        res.best = std::move(sol);
        res.selection = sel;
      }
      continue;
    }

    const double lb = cb.interior_bound(sel);
    if (cut_off(lb)) {
      ++res.pruned;
      if (cb.observer) cb.observer(sel, false, true);
      continue;
    }
    if (cb.observer) cb.observer(sel, false, false);
    const int width = fanout[sel.size()];
    std::vector<int> order;
    if (cb.child_order) order = cb.child_order(sel);
    if (static_cast<int>(order.size()) != width) {
      order.resize(static_cast<size_t>(width));
      std::iota(order.begin(), order.end(), 0);
    }
    for (int i = width - 1; i >= 0; --i) {
      std::vector<int> child = sel;
      child.push_back(order[static_cast<size_t>(i)]);
      stack.push_back(std::move(child));
    }
  }
  return res;
}

std::vector<std::pair<int, int>> flat_clause_index(const FlatClauseSet& clauses) {
  std::vector<std::pair<int, int>> flat;
  for (size_t c = 0; c < clauses.per_cc.size(); ++c)
    for (size_t k = 0; k < clauses.per_cc[c].size(); ++k)
      flat.emplace_back(static_cast<int>(c), static_cast<int>(k));
  return flat;
}

Subproblem root_subproblem(const Subproblem& base) {
  Subproblem root = base;
  for (auto& per_cc : root.selected)
    for (int& j : per_cc) j = -1;
  return root;
}

Subproblem select_clause(const Subproblem& node, int flat_index, int disjunct) {
  const auto flat = flat_clause_index(node.clauses);
  if (flat_index < 0 || flat_index >= static_cast<int>(flat.size()))
    throw std::out_of_range("select_clause: cursor outside clause range");
  Subproblem child = node;
  const auto [c, k] = flat[static_cast<size_t>(flat_index)];
  child.selected[static_cast<size_t>(c)][static_cast<size_t>(k)] = disjunct;
  return child;
}

NiraResult nira_plan(const Subproblem& base, const Config& cfg) {
  const auto flat = flat_clause_index(base.clauses);
  std::vector<int> fanout;
  fanout.reserve(flat.size());
  for (const auto& [c, k] : flat)
    fanout.push_back(
        static_cast<int>(base.clauses.per_cc[static_cast<size_t>(c)][static_cast<size_t>(k)]
                             .disjuncts.size()));

  Subproblem work = root_subproblem(base);
  auto apply = [&](const std::vector<int>& sel) {
    for (auto& per_cc : work.selected)
      for (int& j : per_cc) j = -1;
    for (size_t i = 0; i < sel.size(); ++i) {
      const auto [c, k] = flat[i];
      work.selected[static_cast<size_t>(c)][static_cast<size_t>(k)] = sel[i];
    }
  };

  // Bound memoization: committing a disjunct that the parent's relaxation
  // optimum already satisfies (margin included) cannot change that optimum,
  // so the parent's bound carries over without another solve. This is exact
  // and collapses the cost of the many do-not-care expansions.
  struct CachedBound {
    double value;
    std::vector<Eigen::VectorXd> xbar;
  };
  std::map<std::vector<int>, std::shared_ptr<const CachedBound>> cache;
  const auto covs = propagate_covariance(*base.plant, base.policy, base.init.cov);

  // Unit refutation. A disjunct that is infeasible on its own (margins do not
  // depend on what else is committed, so extra commitments only shrink the
  // feasible set) can never appear in a plan; marking it up front keeps the
  // search from re-deriving that at every prefix. A clause whose disjuncts
  // all refute makes the whole problem infeasible right here, which matters:
  // proving that inside the tree means exhausting it.
  std::vector<std::vector<char>> refuted(flat.size());
  for (size_t i = 0; i < flat.size(); ++i)
    refuted[i].assign(static_cast<size_t>(fanout[i]), 0);
  {
    apply({});
    SubSolution root = solve_frr(work, cfg);
    if (root.status == SolveStatus::Infeasible) {
      NiraResult res;
      res.best.status = SolveStatus::Infeasible;
      res.best.note = "relaxation infeasible at the root";
      res.nodes_visited = 1;
      res.pruned = 1;
      return res;
    }
    if (root.optimal()) {
      auto entry = std::make_shared<CachedBound>();
      entry->value = root.objective;
      entry->xbar = propagate_nominal(*base.plant, base.init.mean, root.controls);
      const auto root_entry = std::shared_ptr<const CachedBound>(entry);
      cache[{}] = root_entry;
      for (size_t i = 0; i < flat.size(); ++i) {
        const auto [c, k] = flat[i];
        const auto& cl = base.clauses.per_cc[static_cast<size_t>(c)][static_cast<size_t>(k)];
        bool alive = false;
        for (size_t j = 0; j < cl.disjuncts.size(); ++j) {
          const auto& d = cl.disjuncts[j];
          const double m =
              safety_margin(d.h, covs[static_cast<size_t>(cl.step)], base.delta_cap[c]);
          // The root optimum is a feasibility witness for anything it
          // satisfies; only the rest need a solve.
          if (d.h.dot(root_entry->xbar[static_cast<size_t>(cl.step)]) <= d.g - m + 1e-9) {
            alive = true;
            continue;
          }
          for (auto& per_cc : work.selected)
            for (int& v : per_cc) v = -1;
          work.selected[static_cast<size_t>(c)][static_cast<size_t>(k)] = static_cast<int>(j);
          const SubSolution probe = solve_frr(work, cfg);
          if (probe.status == SolveStatus::Infeasible)
            refuted[i][j] = 1;
          else
            alive = true;
        }
        if (!alive) {
          NiraResult res;
          res.best.status = SolveStatus::Infeasible;
          res.best.note = "no disjunct of the clause at step " + std::to_string(cl.step) +
                          " is feasible on its own";
          res.nodes_visited = 1;
          res.pruned = 1;
          return res;
        }
      }
    }
  }

  NiraCallbacks cb;
  cb.interior_bound = [&](const std::vector<int>& sel) {
    if (!sel.empty() && refuted[sel.size() - 1][static_cast<size_t>(sel.back())])
      return std::numeric_limits<double>::infinity();
    if (const auto it = cache.find(sel); it != cache.end()) return it->second->value;
    if (!sel.empty()) {
      std::vector<int> parent(sel.begin(), sel.end() - 1);
      const auto pit = cache.find(parent);
      if (pit != cache.end()) {
        const auto [c, k] = flat[sel.size() - 1];
        const auto& cl = base.clauses.per_cc[static_cast<size_t>(c)][static_cast<size_t>(k)];
        const auto& d = cl.disjuncts[static_cast<size_t>(sel.back())];
        const double m =
            safety_margin(d.h, covs[static_cast<size_t>(cl.step)], base.delta_cap[c]);
        if (d.h.dot(pit->second->xbar[static_cast<size_t>(cl.step)]) <= d.g - m + 1e-9) {
          cache[sel] = pit->second;
          return pit->second->value;
        }
      }
    }
    apply(sel);
    const SubSolution f = solve_frr(work, cfg);
    if (f.optimal()) {
      auto entry = std::make_shared<CachedBound>();
      entry->value = f.objective;
      entry->xbar = propagate_nominal(*base.plant, base.init.mean, f.controls);
      cache[sel] = std::move(entry);
      return f.objective;
    }
    if (f.status == SolveStatus::Infeasible)
      return std::numeric_limits<double>::infinity();
    // A failed bound must not prune a possibly optimal subtree.
    return -std::numeric_limits<double>::infinity();
  };
  cb.leaf_bound = cb.interior_bound;
  // Explore the disjunct with the largest slack at the parent's relaxation
  // optimum first. The first dive then rides the memoized bounds to a leaf
  // near the relaxation value, and that incumbent prunes the bulk of the
  // remaining combinations.
  cb.child_order = [&](const std::vector<int>& sel) {
    std::vector<int> order;
    const auto it = cache.find(sel);
    if (it == cache.end()) return order;
    const auto [c, k] = flat[sel.size()];
    const auto& cl = base.clauses.per_cc[static_cast<size_t>(c)][static_cast<size_t>(k)];
    const auto& xbar = it->second->xbar[static_cast<size_t>(cl.step)];
    std::vector<std::pair<double, int>> slack;
    for (size_t j = 0; j < cl.disjuncts.size(); ++j) {
      const auto& d = cl.disjuncts[j];
      const double m = safety_margin(d.h, covs[static_cast<size_t>(cl.step)], base.delta_cap[c]);
      slack.emplace_back(d.g - m - d.h.dot(xbar), static_cast<int>(j));
    }
    std::stable_sort(slack.begin(), slack.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [s, j] : slack) order.push_back(j);
    return order;
  };
  cb.leaf_solve = [&](const std::vector<int>& sel) {
    apply(sel);
    if (cfg.fixed_risk) return solve_fixed_risk(work, initial_allocation(work, cfg), cfg);
    return solve_subproblem_ira(work, cfg);
  };
  return nira_search(fanout, cb, cfg);
}

} // namespace psulu
