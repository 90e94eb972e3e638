#include "psulu/subproblem.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace psulu {

int Subproblem::scope_size(int c) const {
  int n = 0;
  for (int j : selected[static_cast<size_t>(c)])
    if (j >= 0) ++n;
  return n;
}

int Subproblem::horizon_cap(int c) const {
  int cap = -1;
  for (const auto& cl : clauses.per_cc[static_cast<size_t>(c)]) cap = std::max(cap, cl.step);
  return std::min(cap, plant->N - 1);
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// LP/QP encoding of a subproblem with margins left out; a solve folds the
// allocation's margins into the right-hand side. Variables are the stacked
// nominal controls (step-major) plus, for the manhattan objective, one slack
// per control entry.
struct Encoding {
  int n_controls = 0;
  int n_vars = 0;
  MatrixXd G;
  VectorXd h0;
  MatrixXd Aeq;
  VectorXd beq;
  VectorXd lin;
  MatrixXd Q;
  double constant = 0.0; // reporting offset dropped from the solve

  struct StateRow {
    int c, k, slot, row;
    double sigma;
  };
  struct SatRow {
    int t, i, row;
    double sigma;
  };
  std::vector<StateRow> state_rows;
  std::vector<SatRow> sat_rows;
};

void check_subproblem(const Subproblem& sub) {
  if (sub.plant == nullptr) throw std::invalid_argument("subproblem: missing plant");
  if (sub.plant->N < 1) throw std::invalid_argument("subproblem: empty horizon");
  const size_t ncc = sub.clauses.per_cc.size();
  if (sub.selected.size() != ncc || sub.delta_cap.size() != ncc)
    throw std::invalid_argument("subproblem: per-constraint arrays out of step");
  for (size_t c = 0; c < ncc; ++c) {
    if (sub.selected[c].size() != sub.clauses.per_cc[c].size())
      throw std::invalid_argument("subproblem: selection array out of step");
    for (size_t k = 0; k < sub.selected[c].size(); ++k) {
      const int j = sub.selected[c][k];
      if (j >= static_cast<int>(sub.clauses.per_cc[c][k].disjuncts.size()))
        throw std::invalid_argument("subproblem: selected disjunct out of range");
      const int step = sub.clauses.per_cc[c][k].step;
      if (step < 0 || step > sub.plant->N)
        throw std::invalid_argument("subproblem: clause step outside horizon");
    }
  }
  for (const auto& me : sub.mean_eqs)
    if (me.step < 0 || me.step > sub.plant->N)
      throw std::invalid_argument("subproblem: mean equality step outside horizon");
}

Encoding encode(const Subproblem& sub) {
  check_subproblem(sub);
  const auto& plant = *sub.plant;
  const int N = plant.N;
  const int nx = plant.n_x();
  const int nu = plant.n_u();
  Encoding e;
  e.n_controls = N * nu;
  const bool manhattan = sub.objective.kind == Objective::Kind::ManhattanControl;
  e.n_vars = manhattan ? 2 * e.n_controls : e.n_controls;

  // xbar_t = f[t] + S[t] u_stack
  std::vector<MatrixXd> S(static_cast<size_t>(N) + 1);
  std::vector<VectorXd> f(static_cast<size_t>(N) + 1);
  S[0] = MatrixXd::Zero(nx, e.n_controls);
  f[0] = sub.init.mean;
  for (int t = 0; t < N; ++t) {
    S[t + 1] = plant.A_at(t) * S[t];
    S[t + 1].middleCols(t * nu, nu) += plant.B_at(t);
    f[t + 1] = plant.A_at(t) * f[t];
  }
  const auto covs = propagate_covariance(plant, sub.policy, sub.init.cov);
  const bool closed = !sub.open_loop();
  const MatrixXd K = sub.policy.gain_or_zero(nu, nx);

  int n_state = 0;
  for (int c = 0; c < sub.n_cc(); ++c) n_state += sub.scope_size(c);
  const int n_sat = N * plant.U.rows();
  const int n_man = manhattan ? 2 * e.n_controls : 0;
  const int rows = n_state + n_sat + n_man;

  e.G = MatrixXd::Zero(rows, e.n_vars);
  e.h0 = VectorXd::Zero(rows);
  int r = 0;

  for (int c = 0; c < sub.n_cc(); ++c) {
    int slot = 0;
    for (size_t k = 0; k < sub.clauses.per_cc[c].size(); ++k) {
      const int j = sub.selected[c][k];
      if (j < 0) continue;
      const auto& cl = sub.clauses.per_cc[c][k];
      const HalfSpace& d = cl.disjuncts[static_cast<size_t>(j)];
      e.G.row(r).head(e.n_controls) = d.h.transpose() * S[cl.step];
      e.h0(r) = d.g - d.h.dot(f[cl.step]);
      const double var = d.h.dot(covs[cl.step] * d.h);
      e.state_rows.push_back({c, static_cast<int>(k), slot, r, std::sqrt(std::max(0.0, var))});
      ++slot;
      ++r;
    }
  }

  for (int t = 0; t < N; ++t) {
    for (int i = 0; i < plant.U.rows(); ++i) {
      e.G.row(r).segment(t * nu, nu) = plant.U.H.row(i);
      e.h0(r) = plant.U.g(i);
      if (closed) {
        const VectorXd ku = K.transpose() * plant.U.H.row(i).transpose();
        const double var = ku.dot(covs[t] * ku);
        e.sat_rows.push_back({t, i, r, std::sqrt(std::max(0.0, var))});
      }
      ++r;
    }
  }

  if (manhattan) {
    for (int v = 0; v < e.n_controls; ++v) {
      e.G(r, v) = 1.0;
      e.G(r, e.n_controls + v) = -1.0;
      ++r;
      e.G(r, v) = -1.0;
      e.G(r, e.n_controls + v) = -1.0;
      ++r;
    }
  }

  int eq_rows = 0;
  for (const auto& me : sub.mean_eqs) eq_rows += static_cast<int>(me.H.rows());
  e.Aeq = MatrixXd::Zero(eq_rows, e.n_vars);
  e.beq = VectorXd::Zero(eq_rows);
  int er = 0;
  for (const auto& me : sub.mean_eqs) {
    e.Aeq.block(er, 0, me.H.rows(), e.n_controls) = me.H * S[me.step];
    e.beq.segment(er, me.H.rows()) = me.g - me.H * f[me.step];
    er += static_cast<int>(me.H.rows());
  }

  e.lin = VectorXd::Zero(e.n_vars);
  switch (sub.objective.kind) {
    case Objective::Kind::ManhattanControl:
      e.lin.tail(e.n_controls).setConstant(sub.objective.weight);
      break;
    case Objective::Kind::LinearControl:
      if (sub.objective.linear.size() != e.n_controls)
        throw std::invalid_argument("subproblem: linear objective size mismatch");
      e.lin = sub.objective.linear;
      break;
    case Objective::Kind::QuadraticExpectedControl:
      e.Q = 2.0 * sub.objective.weight * MatrixXd::Identity(e.n_vars, e.n_vars);
      if (closed)
        for (int t = 0; t < N; ++t)
          e.constant += sub.objective.weight * (K * covs[t] * K.transpose()).trace();
      break;
    case Objective::Kind::EndTime:
      break; // schedule-determined; feasibility only
  }
  return e;
}

VectorXd margined_rhs(const Encoding& e, const RiskAllocation& alloc) {
  VectorXd h = e.h0;
  for (const auto& s : e.state_rows)
    h(s.row) -= safety_margin_sigma(s.sigma, alloc.delta[s.c][s.slot]);
  for (const auto& q : e.sat_rows)
    h(q.row) -= safety_margin_sigma(q.sigma, alloc.eps(q.t, q.i));
  return h;
}

SubSolution solve_encoded(const Subproblem& sub, const Encoding& e, const RiskAllocation& alloc,
                          const Config& cfg) {
  LpQpProblem p;
  p.Q = e.Q;
  p.c = e.lin;
  p.G = e.G;
  p.h = margined_rhs(e, alloc);
  p.A = e.Aeq;
  p.b = e.beq;
  IpmOptions opt;
  opt.tol = cfg.ipm_tol;
  opt.accept = cfg.ipm_accept;
  opt.max_iter = cfg.ipm_max_iter;
  opt.feas_eps = cfg.feas_slack;
  const LpQpResult r = solve_lp_qp(p, opt);

  SubSolution out;
  out.status = r.status;
  out.alloc = alloc;
  if (r.status != SolveStatus::Optimal) {
    out.note = r.note;
    return out;
  }
  out.objective = r.value + e.constant;
  const int nu = sub.plant->n_u();
  out.controls.resize(static_cast<size_t>(sub.plant->N));
  for (int t = 0; t < sub.plant->N; ++t) out.controls[t] = r.x.segment(t * nu, nu);
  out.state_active.resize(sub.clauses.per_cc.size());
  for (size_t c = 0; c < sub.clauses.per_cc.size(); ++c)
    out.state_active[c].assign(sub.clauses.per_cc[c].size(), false);
  for (const auto& s : e.state_rows) {
    const double slack = p.h(s.row) - e.G.row(s.row).dot(r.x);
    out.state_active[s.c][s.k] = slack <= cfg.active_slack;
  }
  return out;
}

VectorXd stack_controls(const SubSolution& sol, int n_controls, int nu) {
  VectorXd u = VectorXd::Zero(n_controls);
  for (size_t t = 0; t < sol.controls.size(); ++t) u.segment(t * nu, nu) = sol.controls[t];
  return u;
}

// One reallocation step: shrink inactive entries toward their measured risks,
// then split each budget's freed share equally over its active entries;
// saturation entries receive budget only when no state clause is active, and
// shared entries are scaled back if another budget would overflow. The
// current optimum stays feasible under the new allocation throughout.
RiskAllocation reallocate(const Subproblem& sub, const Encoding& e, const RiskAllocation& a,
                          const VectorXd& u, const Config& cfg) {
  RiskAllocation next = a;
  const int ncc = sub.n_cc();
  std::vector<int> n_active_delta(static_cast<size_t>(ncc), 0);
  std::vector<char> state_act(e.state_rows.size(), 0);
  std::vector<char> sat_act(e.sat_rows.size(), 0);

  for (size_t idx = 0; idx < e.state_rows.size(); ++idx) {
    const auto& s = e.state_rows[idx];
    const double raw = e.h0(s.row) - e.G.row(s.row).head(e.n_controls).dot(u);
    const double delta = a.delta[s.c][s.slot];
    const double m = safety_margin_sigma(s.sigma, delta);
    if (raw - m <= cfg.active_slack) {
      state_act[idx] = 1;
      ++n_active_delta[static_cast<size_t>(s.c)];
    } else {
      const double measured = actual_risk_sigma(raw, s.sigma);
      next.delta[s.c][s.slot] = std::clamp(
          cfg.ira_interp * delta + (1.0 - cfg.ira_interp) * measured, cfg.delta_min, 0.5);
    }
  }
  for (size_t idx = 0; idx < e.sat_rows.size(); ++idx) {
    const auto& q = e.sat_rows[idx];
    const double raw = e.h0(q.row) - e.G.row(q.row).head(e.n_controls).dot(u);
    const double eps = a.eps(q.t, q.i);
    const double m = safety_margin_sigma(q.sigma, eps);
    if (raw - m <= cfg.active_slack) {
      sat_act[idx] = 1;
    } else {
      const double measured = actual_risk_sigma(raw, q.sigma);
      next.eps(q.t, q.i) = std::clamp(
          cfg.ira_interp * eps + (1.0 - cfg.ira_interp) * measured, cfg.delta_min, 0.5);
    }
  }

  MatrixXd added;
  if (next.eps.size() > 0) added = MatrixXd::Zero(next.eps.rows(), next.eps.cols());

  for (int c = 0; c < ncc; ++c) {
    const double residual = sub.delta_cap[static_cast<size_t>(c)] - next.budget_lhs(c);
    if (residual <= 0.0) continue;
    if (n_active_delta[static_cast<size_t>(c)] > 0) {
      const double add = residual / n_active_delta[static_cast<size_t>(c)];
      for (size_t idx = 0; idx < e.state_rows.size(); ++idx) {
        const auto& s = e.state_rows[idx];
        if (s.c == c && state_act[idx])
          next.delta[s.c][s.slot] = std::min(0.5, next.delta[s.c][s.slot] + add);
      }
    } else {
      std::vector<size_t> in_scope;
      for (size_t idx = 0; idx < e.sat_rows.size(); ++idx)
        if (sat_act[idx] && e.sat_rows[idx].t <= a.tcmax[static_cast<size_t>(c)])
          in_scope.push_back(idx);
      if (in_scope.empty()) continue;
      const double add = residual / static_cast<double>(in_scope.size());
      for (size_t idx : in_scope) {
        const auto& q = e.sat_rows[idx];
        const double head = std::min(add, 0.5 - next.eps(q.t, q.i));
        next.eps(q.t, q.i) += head;
        added(q.t, q.i) += head;
      }
    }
  }

  // Saturation entries are shared between budgets; pull back this round's
  // additions wherever they overflowed another budget.
  for (int c = 0; c < ncc; ++c) {
    const double lhs = next.budget_lhs(c);
    const double cap = sub.delta_cap[static_cast<size_t>(c)];
    if (lhs <= cap + 1e-15 || added.size() == 0) continue;
    double mass = 0.0;
    const int last = std::min<int>(a.tcmax[static_cast<size_t>(c)], next.eps.rows() - 1);
    for (int t = 0; t <= last; ++t) mass += added.row(t).sum();
    if (mass <= 0.0) continue;
    const double keep = std::max(0.0, 1.0 - (lhs - cap) / mass);
    for (int t = 0; t <= last; ++t) {
      for (int i = 0; i < next.eps.cols(); ++i) {
        const double back = (1.0 - keep) * added(t, i);
        next.eps(t, i) -= back;
        added(t, i) -= back;
      }
    }
  }
  return next;
}

} // namespace

RiskAllocation initial_allocation(const Subproblem& sub, const Config& cfg) {
  check_subproblem(sub);
  RiskAllocation a;
  const int ncc = sub.n_cc();
  a.delta.resize(static_cast<size_t>(ncc));
  a.tcmax.resize(static_cast<size_t>(ncc));
  for (int c = 0; c < ncc; ++c) {
    a.tcmax[static_cast<size_t>(c)] = sub.horizon_cap(c);
    const int n_sc = sub.scope_size(c);
    if (n_sc > 0)
      a.delta[static_cast<size_t>(c)].assign(
          static_cast<size_t>(n_sc),
          std::max(cfg.delta_min,
                   sub.delta_cap[static_cast<size_t>(c)] * cfg.state_risk_share / n_sc));
  }
  const int n_rows = sub.plant->U.rows();
  if (!sub.open_loop() && n_rows > 0) {
    a.eps = Eigen::MatrixXd::Constant(sub.plant->N, n_rows, 0.5);
    for (int t = 0; t < sub.plant->N; ++t) {
      double v = 0.5;
      for (int c = 0; c < ncc; ++c) {
        const int cap = a.tcmax[static_cast<size_t>(c)];
        if (t > cap) continue;
        const double share = sub.delta_cap[static_cast<size_t>(c)] *
                             (1.0 - cfg.state_risk_share) / ((cap + 1) * n_rows);
        v = std::min(v, share);
      }
      a.eps.row(t).setConstant(std::max(v, cfg.delta_min));
    }
  }
  return a;
}

RiskAllocation baseline_allocation(const Subproblem& sub, const Config& cfg) {
  RiskAllocation a = initial_allocation(sub, cfg);
  const int ncc = sub.n_cc();
  for (int c = 0; c < ncc; ++c) {
    int fanout = 0;
    for (const FlatClause& cl : sub.clauses.per_cc[static_cast<size_t>(c)])
      fanout += static_cast<int>(cl.disjuncts.size());
    if (fanout <= 0) continue;
    const double share = std::max(
        cfg.delta_min,
        sub.delta_cap[static_cast<size_t>(c)] * cfg.state_risk_share / fanout);
    for (double& d : a.delta[static_cast<size_t>(c)]) d = share;
  }
  return a;
}

RiskAllocation relaxed_allocation(const Subproblem& sub) {
  check_subproblem(sub);
  RiskAllocation a;
  const int ncc = sub.n_cc();
  a.delta.resize(static_cast<size_t>(ncc));
  a.tcmax.resize(static_cast<size_t>(ncc));
  for (int c = 0; c < ncc; ++c) {
    a.tcmax[static_cast<size_t>(c)] = sub.horizon_cap(c);
    a.delta[static_cast<size_t>(c)].assign(static_cast<size_t>(sub.scope_size(c)),
                                           sub.delta_cap[static_cast<size_t>(c)]);
  }
  const int n_rows = sub.plant->U.rows();
  if (!sub.open_loop() && n_rows > 0) {
    a.eps = Eigen::MatrixXd::Constant(sub.plant->N, n_rows, 0.5);
    for (int t = 0; t < sub.plant->N; ++t) {
      double v = 0.5;
      for (int c = 0; c < ncc; ++c)
        if (t <= a.tcmax[static_cast<size_t>(c)])
          v = std::min(v, sub.delta_cap[static_cast<size_t>(c)]);
      a.eps.row(t).setConstant(v);
    }
  }
  return a;
}

SubSolution solve_fixed_risk(const Subproblem& sub, const RiskAllocation& alloc,
                             const Config& cfg) {
  const Encoding e = encode(sub);
  return solve_encoded(sub, e, alloc, cfg);
}

SubSolution solve_frr(const Subproblem& sub, const Config& cfg) {
  const Encoding e = encode(sub);
  SubSolution s = solve_encoded(sub, e, relaxed_allocation(sub), cfg);
  if (s.status == SolveStatus::Infeasible) s.note = "relaxation infeasible";
  return s;
}

SubSolution solve_subproblem_ira(const Subproblem& sub, const Config& cfg) {
  const Encoding e = encode(sub);

  // The relaxation has the loosest margins any budget-feasible allocation
  // admits, so its infeasibility settles the question.
  SubSolution frr = solve_encoded(sub, e, relaxed_allocation(sub), cfg);
  if (!frr.optimal()) {
    frr.note = frr.status == SolveStatus::Infeasible ? "relaxation infeasible" : frr.note;
    frr.objective = std::numeric_limits<double>::infinity();
    return frr;
  }

  RiskAllocation a = initial_allocation(sub, cfg);
  SubSolution cur = solve_encoded(sub, e, a, cfg);
  if (!cur.optimal()) {
    if (cur.status == SolveStatus::Infeasible) cur.note = "uniform starting allocation infeasible";
    return cur;
  }
  cur.ira_iterations = 1;

  const int nu = sub.plant->n_u();
  for (int iter = 1; iter < cfg.ira_max_iter; ++iter) {
    const VectorXd u = stack_controls(cur, e.n_controls, nu);
    const RiskAllocation next = reallocate(sub, e, a, u, cfg);
    SubSolution trial = solve_encoded(sub, e, next, cfg);
    if (!trial.optimal() || trial.objective > cur.objective + 1e-12) {
      // The shrink construction keeps the incumbent feasible, so a failed or
      // worse re-solve is numerical noise; keep what we have.
      break;
    }
    const double improve = cur.objective - trial.objective;
    trial.ira_iterations = iter + 1;
    a = next;
    cur = trial;
    if (improve < cfg.ira_tol) break;
  }
  return cur;
}

} // namespace psulu
