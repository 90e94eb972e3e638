#pragma once

#include <Eigen/Core>
#include <utility>
#include <vector>

#include "psulu/config.hpp"
#include "psulu/regions.hpp"

namespace psulu {

// Control admissible set as a polytope H u <= g (rows are half-spaces).
struct ControlPolytope {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;

  int rows() const { return static_cast<int>(H.rows()); }
  bool contains(const Eigen::VectorXd& u, double tol = 0.0) const {
    return rows() == 0 || ((H * u).array() <= g.array() + tol).all();
  }
};

// Linear plant with additive Gaussian disturbance:
//   x_{t+1} = A x_t + B u_t + w_t,  w_t ~ N(0, Sigma_w).
// Scenarios are time-invariant, so one physical matrix serves every step; the
// indexed accessors keep call sites honest about the per-step reading.
struct StochasticPlantModel {
  Eigen::MatrixXd A, B, Sigma_w;
  ControlPolytope U;
  int N = 0;
  double dt = 1.0;

  int n_x() const { return static_cast<int>(A.rows()); }
  int n_u() const { return static_cast<int>(B.cols()); }
  const Eigen::MatrixXd& A_at(int) const { return A; }
  const Eigen::MatrixXd& B_at(int) const { return B; }
  const Eigen::MatrixXd& noise_at(int) const { return Sigma_w; }
};

struct InitialCondition {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

// u_t = ubar_t + K (x_t - xbar_t). Open loop stores an empty gain.
struct FeedbackPolicy {
  Eigen::MatrixXd K;
  bool closed_loop() const { return K.size() > 0; }
  Eigen::MatrixXd gain_or_zero(int n_u, int n_x) const {
    return closed_loop() ? K : Eigen::MatrixXd::Zero(n_u, n_x);
  }
};

struct BeliefTrajectory {
  std::vector<Eigen::VectorXd> nominal;  // xbar_0..xbar_N
  std::vector<Eigen::MatrixXd> cov;      // Sigma_x,0..Sigma_x,N
};

// xbar_{t+1} = A xbar_t + B ubar_t; returns xbar_0..xbar_N.
std::vector<Eigen::VectorXd> propagate_nominal(const StochasticPlantModel& model,
                                               const Eigen::VectorXd& x0,
                                               const std::vector<Eigen::VectorXd>& controls);

// Sigma_{t+1} = (A + B K) Sigma_t (A + B K)' + Sigma_w, symmetrized each step;
// returns Sigma_0..Sigma_N.
std::vector<Eigen::MatrixXd> propagate_covariance(const StochasticPlantModel& model,
                                                  const FeedbackPolicy& policy,
                                                  const Eigen::MatrixXd& cov0);

// Steady-state discrete LQR gain for u = K x, by Riccati fixed-point
// iteration. Throws on non-convergence (unstabilizable or ill-conditioned).
Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                         const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                         const Config& cfg = {});

// n_rays half-spaces r_n . u <= u_max with r_n on the unit circle; the
// polytope contains the u_max ball and stays inside the u_max/cos(pi/n) ball.
ControlPolytope ray_polytope(double u_max, int n_rays);

struct DoubleIntegratorModel {
  StochasticPlantModel model;
  Region velocity_region; // |v| <= v_max as a remain-in CNF
};

// Planar point mass: state (x, y, vx, vy), acceleration input, disturbance on
// the positions with standard deviation sigma.
DoubleIntegratorModel double_integrator(double dt, double sigma, double u_max, double v_max,
                                        int n_rays);

// Impulse-invariant discretization of the in-plane Clohessy-Wiltshire
// dynamics about a circular orbit with rate omega; state (x, y, vx, vy),
// input an impulsive velocity change.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> cw_discrete(double omega, double dt);

} // namespace psulu
