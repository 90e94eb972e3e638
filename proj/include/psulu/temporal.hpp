#pragma once

#include <limits>
#include <vector>

#include <Eigen/Core>

#include "psulu/ccqsp.hpp"

namespace psulu {

// Weighted distance graph of a simple temporal network. Edge e->e' with
// weight w encodes s(e') - s(e) <= w; parallel constraints keep the minimum.
struct DistanceGraph {
  Eigen::MatrixXd w;

  static DistanceGraph from_stcs(int n_events, const std::vector<TemporalConstraint>& stcs);
};

// All-pairs shortest-path closure of a DistanceGraph. Inconsistent networks
// (negative cycles) are a legal value, not an error.
class DGraph {
 public:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  bool consistent() const { return ok; }
  int n_events() const { return static_cast<int>(d.rows()); }
  double dist(int from, int to) const { return d(from, to); }

  // bounds on s(e) in seconds relative to the start event
  double earliest(int e) const { return -d(e, 0); }
  double latest(int e) const { return d(0, e); }

  // Pin event e at step*dt and re-close; this value is unchanged.
  DGraph fix_event(int e, int step, double dt) const;

  // Integer steps t in {0..N} with earliest(e) <= t*dt <= latest(e).
  std::vector<int> feasible_steps(int e, double dt, int N) const;

  friend DGraph compute_dgraph(const DistanceGraph& g, double tol);

 private:
  Eigen::MatrixXd d;
  bool ok = false;
  double tol = 1e-9;
};

DGraph compute_dgraph(const DistanceGraph& g, double tol = 1e-9);

} // namespace psulu
