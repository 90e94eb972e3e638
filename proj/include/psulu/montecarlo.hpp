#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "psulu/ccqsp.hpp"
#include "psulu/dynamics.hpp"
#include "psulu/scheduler.hpp"

namespace psulu {

// Draws from N(0, Sigma). Cholesky when the covariance is positive definite;
// singular or slightly indefinite inputs fall back to an eigendecomposition
// with negative eigenvalues clipped at zero.
class GaussianSampler {
public:
  GaussianSampler() = default;
  explicit GaussianSampler(const Eigen::MatrixXd& cov);
  Eigen::VectorXd draw(std::mt19937_64& rng) const;
  int dim() const { return static_cast<int>(L_.rows()); }

private:
  Eigen::MatrixXd L_;
};

struct SimulationConfig {
  int samples = 10000;
  std::uint64_t seed = 0;
};

// Engine for one sample, derived from (seed, sample index) alone, so the
// order samples are visited in can never change a report.
std::mt19937_64 sample_stream(std::uint64_t seed, int sample);

// Euclidean projection onto H u <= g; returns u unchanged when feasible.
Eigen::VectorXd project_onto_polytope(const Eigen::VectorXd& u, const ControlPolytope& U);

struct SampleTrajectory {
  std::vector<Eigen::VectorXd> x; // realized states x_0..x_N
  std::vector<Eigen::VectorXd> u; // applied controls, after any projection
  std::vector<bool> saturated;    // per step: the commanded control left U
};

// One stochastic rollout: u_t = ubar_t + K (x_t - xbar_t), actuators saturate
// by projecting the command onto U, then x_{t+1} = A x_t + B u_t + w_t.
// `nominal` is the planned trajectory the feedback tracks (ignored open loop).
SampleTrajectory simulate_one(const StochasticPlantModel& model, const FeedbackPolicy& policy,
                              const std::vector<Eigen::VectorXd>& controls,
                              const std::vector<Eigen::VectorXd>& nominal,
                              const Eigen::VectorXd& x0, const GaussianSampler& noise,
                              std::mt19937_64& rng);

struct ChanceConstraintReport {
  std::string name;
  double delta = 0.0; // budget the plan promised
  int violations = 0;
  double p_fail = 0.0;
  double wilson_lo = 0.0; // 95% score interval on the failure rate
  double wilson_hi = 0.0;
  bool pass = false; // wilson_hi <= delta
};

struct ValidationReport {
  int samples = 0;
  std::uint64_t seed = 0;
  std::vector<ChanceConstraintReport> per_cc;
  double expected_cost = 0.0;          // mean realized plan cost
  std::vector<double> saturation_freq; // per step, fraction of samples projected

  bool pass() const {
    for (const auto& cc : per_cc)
      if (!cc.pass) return false;
    return true;
  }
};

// 95% Wilson score interval for k successes in n trials; always contains k/n.
std::pair<double, double> wilson_interval(int k, int n, double z = 1.959963984540054);

// Roll the plan out cfg.samples times and count, per chance constraint, the
// samples whose realized states violate any flattened clause at its scheduled
// step. Deterministic for a fixed (seed, samples).
ValidationReport estimate_pfail(const PlanSolution& plan, const Ccqsp& ccqsp,
                                const StochasticPlantModel& model, const FeedbackPolicy& policy,
                                const InitialCondition& init, const Objective& objective,
                                const SimulationConfig& cfg);

} // namespace psulu
