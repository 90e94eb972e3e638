#include "psulu/dynamics.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace psulu {

std::vector<Eigen::VectorXd> propagate_nominal(const StochasticPlantModel& model,
                                               const Eigen::VectorXd& x0,
                                               const std::vector<Eigen::VectorXd>& controls) {
  if (x0.size() != model.n_x()) throw std::invalid_argument("propagate_nominal: x0 dimension");
  std::vector<Eigen::VectorXd> xs;
  xs.reserve(controls.size() + 1);
  xs.push_back(x0);
  for (size_t t = 0; t < controls.size(); ++t) {
    if (controls[t].size() != model.n_u())
      throw std::invalid_argument("propagate_nominal: control dimension");
    xs.push_back(model.A_at(static_cast<int>(t)) * xs.back() +
                 model.B_at(static_cast<int>(t)) * controls[t]);
  }
  return xs;
}

std::vector<Eigen::MatrixXd> propagate_covariance(const StochasticPlantModel& model,
                                                  const FeedbackPolicy& policy,
                                                  const Eigen::MatrixXd& cov0) {
  const int n = model.n_x();
  if (cov0.rows() != n || cov0.cols() != n)
    throw std::invalid_argument("propagate_covariance: cov0 dimension");
  Eigen::MatrixXd K = policy.gain_or_zero(model.n_u(), n);
  std::vector<Eigen::MatrixXd> covs;
  covs.reserve(model.N + 1);
  covs.push_back(0.5 * (cov0 + cov0.transpose()));
  for (int t = 0; t < model.N; ++t) {
    Eigen::MatrixXd Acl = model.A_at(t) + model.B_at(t) * K;
    Eigen::MatrixXd next = Acl * covs.back() * Acl.transpose() + model.noise_at(t);
    covs.push_back(0.5 * (next + next.transpose()));
  }
  return covs;
}

Eigen::MatrixXd lqr_gain(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                         const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                         const Config& cfg) {
  const int n = static_cast<int>(A.rows());
  Eigen::MatrixXd P = Q;
  for (int it = 0; it < cfg.riccati_max_iter; ++it) {
    Eigen::MatrixXd BtP = B.transpose() * P;
    Eigen::MatrixXd S = R + BtP * B;
    Eigen::MatrixXd Knext = S.ldlt().solve(BtP * A);
    Eigen::MatrixXd Pnext = Q + A.transpose() * (P - BtP.transpose() * Knext) * A;
    Pnext = 0.5 * (Pnext + Pnext.transpose());
    double diff = (Pnext - P).cwiseAbs().maxCoeff();
    double scale = 1.0 + P.cwiseAbs().maxCoeff();
    P = Pnext;
    if (diff <= cfg.riccati_tol * scale) {
      Eigen::MatrixXd K = -(R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
      Eigen::VectorXcd eig = (A + B * K).eigenvalues();
      if (eig.size() == n && eig.cwiseAbs().maxCoeff() < 1.0) return K;
      throw std::runtime_error("lqr_gain: converged P but closed loop not stable");
    }
  }
  throw std::runtime_error("lqr_gain: unstabilizable or ill-conditioned");
}

ControlPolytope ray_polytope(double u_max, int n_rays) {
  if (n_rays < 3) throw std::invalid_argument("ray_polytope: need at least 3 rays");
  ControlPolytope U;
  U.H.resize(n_rays, 2);
  U.g = Eigen::VectorXd::Constant(n_rays, u_max);
  for (int n = 1; n <= n_rays; ++n) {
    double ang = 2.0 * M_PI * n / n_rays;
    U.H(n - 1, 0) = std::cos(ang);
    U.H(n - 1, 1) = std::sin(ang);
  }
  return U;
}

DoubleIntegratorModel double_integrator(double dt, double sigma, double u_max, double v_max,
                                        int n_rays) {
  if (dt <= 0.0) throw std::invalid_argument("double_integrator: dt must be positive");
  DoubleIntegratorModel out;
  StochasticPlantModel& m = out.model;
  m.A = Eigen::MatrixXd::Identity(4, 4);
  m.A(0, 2) = dt;
  m.A(1, 3) = dt;
  m.B = Eigen::MatrixXd::Zero(4, 2);
  m.B(0, 0) = 0.5 * dt * dt;
  m.B(1, 1) = 0.5 * dt * dt;
  m.B(2, 0) = dt;
  m.B(3, 1) = dt;
  m.Sigma_w = Eigen::MatrixXd::Zero(4, 4);
  m.Sigma_w(0, 0) = sigma * sigma;
  m.Sigma_w(1, 1) = sigma * sigma;
  m.U = ray_polytope(u_max, n_rays);
  m.dt = dt;
  out.velocity_region = speed_region(v_max, n_rays, 4, 2, 3);
  return out;
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> cw_discrete(double omega, double dt) {
  if (omega <= 0.0) throw std::invalid_argument("cw_discrete: omega must be positive");
  if (dt < 0.0) throw std::invalid_argument("cw_discrete: dt must be nonnegative");
  const double c = std::cos(omega * dt);
  const double s = std::sin(omega * dt);
  Eigen::MatrixXd A(4, 4);
  A << 4.0 - 3.0 * c, 0.0, s / omega, 2.0 * (1.0 - c) / omega,                     //
      -6.0 * (omega * dt - s), 1.0, -2.0 * (1.0 - c) / omega, 4.0 * s / omega - 3.0 * dt, //
      3.0 * omega * s, 0.0, c, 2.0 * s,                                            //
      -6.0 * omega * (1.0 - c), 0.0, -2.0 * s, 4.0 * c - 3.0;
  Eigen::MatrixXd B = A.rightCols(2); // impulse maps straight onto the velocity states
  return {A, B};
}

} // namespace psulu
