#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "psulu/config.hpp"
#include "psulu/subproblem.hpp"

namespace psulu {

// Depth-first branch-and-bound over disjunct selections. The search walks a
// flat cursor over the clauses (chance constraints in declaration order,
// clauses in their flattened order); a node at depth d has committed one
// disjunct for each of the first d clauses.
struct NiraCallbacks {
  // Lower bound for every completion of a partial selection; +inf prunes the
  // subtree as infeasible, -inf forces exploration.
  std::function<double(const std::vector<int>&)> interior_bound;
  // Optional cheap bound at a complete selection, consulted before the exact
  // solve; unset means always solve.
  std::function<double(const std::vector<int>&)> leaf_bound;
  // Exact solve of a complete selection.
  std::function<SubSolution(const std::vector<int>&)> leaf_solve;
  // Optional exploration order for the children of a partial selection; must
  // return a permutation of the next clause's disjunct indices (anything else
  // falls back to ascending order). Putting likely-good disjuncts first gets
  // a strong incumbent early and is purely a performance lever.
  std::function<std::vector<int>(const std::vector<int>&)> child_order;
  // Optional trace hook, called once per popped node.
  std::function<void(const std::vector<int>&, bool is_leaf, bool pruned)> observer;
};

struct NiraResult {
  SubSolution best;           // Infeasible status when no leaf admits a plan
  std::vector<int> selection; // winning disjunct per flat clause
  int nodes_visited = 0;
  int leaves_solved = 0;
  int pruned = 0;
};

// Core search over a tree with `fanout[d]` children at depth d. Children are
// explored in ascending disjunct order (or the order `child_order` gives) off
// a last-in first-out stack, so the traversal is depth-first and
// deterministic.
NiraResult nira_search(const std::vector<int>& fanout, const NiraCallbacks& cb,
                       const Config& cfg = {});

// Flat cursor order: (chance constraint, clause index) pairs.
std::vector<std::pair<int, int>> flat_clause_index(const FlatClauseSet& clauses);

// The root commits nothing: every clause out of scope.
Subproblem root_subproblem(const Subproblem& base);

// Commit disjunct j for the flat clause at the cursor position.
Subproblem select_clause(const Subproblem& node, int flat_index, int disjunct);

// Full pipeline: relaxation bounds at interior nodes, exact iterative risk
// allocation at the leaves, returning the global optimum over all disjunct
// combinations of `base` (its own `selected` entries are ignored).
NiraResult nira_plan(const Subproblem& base, const Config& cfg = {});

} // namespace psulu
