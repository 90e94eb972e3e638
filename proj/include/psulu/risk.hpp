#pragma once

#include <Eigen/Core>
#include <vector>

namespace psulu {

// Inverse of the Gauss error function on (-1, 1).
// Rational seed refined by two Newton steps against std::erf.
double inv_erf(double y);

// Standard normal CDF and its inverse.
double norm_cdf(double x);
double norm_quantile(double p);

// Deterministic tightening m(delta) of a half-space constraint h.x <= g such
// that Pr[h.x > g] <= delta whenever h.mean <= g - m(delta).
// m(delta) = sqrt(h' Sigma h) * Phi^{-1}(1 - delta). Zero variance gives 0.
double safety_margin(const Eigen::VectorXd& h, const Eigen::MatrixXd& cov, double delta);
double safety_margin_sigma(double sigma, double delta); // sigma = sqrt(h'Sigma h)

// Same tightening for a control half-space under feedback gain K: the control
// is Gaussian with covariance K Sigma_x K'.
double saturation_margin(const Eigen::VectorXd& h_u, const Eigen::MatrixXd& state_cov,
                         const Eigen::MatrixXd& gain, double eps);

// Pr[h.x > g] for x ~ N(mean, cov). Zero variance resolves by sign of
// h.mean - g; ties count as satisfied (returns 0).
double actual_risk(const Eigen::VectorXd& h, double g, const Eigen::VectorXd& mean,
                   const Eigen::MatrixXd& cov);
double actual_risk_sigma(double slack, double sigma); // slack = g - h.mean

// E[x' Q x] = mean' Q mean + tr(Q cov).
double expected_quadratic(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                          const Eigen::MatrixXd& Q);

// E[|x|] for scalar Gaussian x (folded-normal mean).
double expected_abs(double mean, double std);

// Individual risks for one plan: per chance constraint a vector of clause
// risks delta, plus one shared saturation risk eps(t, i) per control
// half-space i and step t. Budget row c sums its deltas and every eps with
// t <= tcmax[c].
struct RiskAllocation {
  std::vector<std::vector<double>> delta; // [chance constraint][flat clause]
  Eigen::MatrixXd eps;                    // (steps, control half-spaces); 0x0 when open loop
  std::vector<int> tcmax;                 // last step entering each budget row

  double budget_lhs(int c) const;
};

} // namespace psulu
