#pragma once

namespace psulu {

// Shared tolerances and caps. The test suite pins these defaults; override
// per call only where a specific experiment requires it.
struct Config {
  // Riccati fixed-point iteration
  double riccati_tol = 1e-10;
  int riccati_max_iter = 100000;

  // risk allocation
  double delta_min = 1e-9;       // lower clamp on every risk variable
  double state_risk_share = 0.9; // rho: initial budget share for state clauses
  double ira_interp = 0.7;       // alpha: pull toward measured risk on inactive rows
  double ira_tol = 1e-6;         // eta: stop when the objective improves less than this
  int ira_max_iter = 50;
  double active_slack = 1e-6;    // slack at or below which a margin row counts as active

  // interior-point engine
  double ipm_tol = 1e-9;
  // Residual level still reported as optimal. Degenerate vertices (both
  // absolute-value rows active at zero) stall the reduced-system solve near
  // 1e-7 in double precision, so the plan-level solves accept that; clean
  // instances converge to ipm_tol and never consult this.
  double ipm_accept = 1e-6;
  int ipm_max_iter = 120;
  double feas_slack = 1e-7; // certificate slack for "satisfied" constraints

  // search
  double prune_eps = 1e-9;
  double prune_rel = 1e-7; // prune when bound >= incumbent - prune_eps
  // Baseline mode: leaves keep the uniform starting allocation instead of
  // reallocating risk iteratively. The disjunct search is unchanged.
  bool fixed_risk = false;

  // temporal
  double stn_tol = 1e-9; // negative-cycle and step-feasibility tolerance
};

} // namespace psulu
