#include "psulu/temporal.hpp"

#include <algorithm>
#include <cmath>

namespace psulu {

DistanceGraph DistanceGraph::from_stcs(int n_events, const std::vector<TemporalConstraint>& stcs) {
  DistanceGraph g;
  g.w = Eigen::MatrixXd::Constant(n_events, n_events, DGraph::kInf);
  for (int i = 0; i < n_events; ++i) g.w(i, i) = 0.0;
  for (const TemporalConstraint& stc : stcs) {
    if (std::isfinite(stc.ub)) g.w(stc.from, stc.to) = std::min(g.w(stc.from, stc.to), stc.ub);
    if (std::isfinite(stc.lb)) g.w(stc.to, stc.from) = std::min(g.w(stc.to, stc.from), -stc.lb);
  }
  return g;
}

namespace {

void floyd_warshall(Eigen::MatrixXd& d) {
  const int n = static_cast<int>(d.rows());
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) {
      if (d(i, k) == DGraph::kInf) continue;
      for (int j = 0; j < n; ++j) {
        if (d(k, j) == DGraph::kInf) continue;
        double via = d(i, k) + d(k, j);
        if (via < d(i, j)) d(i, j) = via;
      }
    }
}

} // namespace

DGraph compute_dgraph(const DistanceGraph& g, double tol) {
  DGraph out;
  out.d = g.w;
  out.tol = tol;
  floyd_warshall(out.d);
  out.ok = out.d.diagonal().minCoeff() >= -tol;
  return out;
}

DGraph DGraph::fix_event(int e, int step, double dt) const {
  DistanceGraph g;
  g.w = d; // a closed matrix re-closes to itself, so it is a valid weight matrix
  double at = step * dt;
  g.w(0, e) = std::min(g.w(0, e), at);
  g.w(e, 0) = std::min(g.w(e, 0), -at);
  return compute_dgraph(g, tol);
}

std::vector<int> DGraph::feasible_steps(int e, double dt, int N) const {
  std::vector<int> out;
  const double lo = earliest(e);
  const double hi = latest(e);
  for (int t = 0; t <= N; ++t) {
    double at = t * dt;
    if (at >= lo - tol && at <= hi + tol) out.push_back(t);
  }
  return out;
}

} // namespace psulu
