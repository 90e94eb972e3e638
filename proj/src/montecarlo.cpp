#include "psulu/montecarlo.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "psulu/solver.hpp"

namespace psulu {

namespace {

// Controls and clause checks sitting numerically on a boundary count as
// inside; planned inputs routinely saturate the polytope exactly.
const double kBoundaryTol = 1e-9;

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

double realized_cost(const Objective& obj, const std::vector<Eigen::VectorXd>& u, double dt,
                     int end_step) {
  double cost = 0.0;
  switch (obj.kind) {
    case Objective::Kind::ManhattanControl:
      for (const auto& ut : u) cost += ut.lpNorm<1>();
      return obj.weight * cost;
    case Objective::Kind::LinearControl: {
      int k = 0;
      for (const auto& ut : u)
        for (int i = 0; i < ut.size(); ++i) cost += obj.linear[k++] * ut[i];
      return cost;
    }
    case Objective::Kind::QuadraticExpectedControl:
      for (const auto& ut : u) cost += ut.squaredNorm();
      return obj.weight * cost;
    case Objective::Kind::EndTime:
      return obj.weight * end_step * dt;
  }
  return cost;
}

} // namespace

GaussianSampler::GaussianSampler(const Eigen::MatrixXd& cov) {
  const int n = static_cast<int>(cov.rows());
  if (n == 0) return;
  const Eigen::MatrixXd sym = 0.5 * (cov + cov.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() == Eigen::Success) {
    L_ = llt.matrixL();
    return;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  L_ = es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

Eigen::VectorXd GaussianSampler::draw(std::mt19937_64& rng) const {
  std::normal_distribution<double> n01;
  Eigen::VectorXd z(L_.cols());
  for (int i = 0; i < z.size(); ++i) z[i] = n01(rng);
  return L_ * z;
}

std::mt19937_64 sample_stream(std::uint64_t seed, int sample) {
  std::uint64_t s = splitmix64(seed);
  s ^= 0x9e3779b97f4a7c15ull * (static_cast<std::uint64_t>(sample) + 1);
  return std::mt19937_64(splitmix64(s));
}

Eigen::VectorXd project_onto_polytope(const Eigen::VectorXd& u, const ControlPolytope& U) {
  if (U.contains(u, kBoundaryTol)) return u;
  LpQpProblem qp;
  qp.Q = Eigen::MatrixXd::Identity(u.size(), u.size());
  qp.c = -u;
  qp.G = U.H;
  qp.h = U.g;
  const LpQpResult res = solve_lp_qp(qp);
  if (res.status != SolveStatus::Optimal && res.status != SolveStatus::IterationLimit)
    throw std::runtime_error("project_onto_polytope: projection failed: " + res.note);
  return res.x;
}

SampleTrajectory simulate_one(const StochasticPlantModel& model, const FeedbackPolicy& policy,
                              const std::vector<Eigen::VectorXd>& controls,
                              const std::vector<Eigen::VectorXd>& nominal,
                              const Eigen::VectorXd& x0, const GaussianSampler& noise,
                              std::mt19937_64& rng) {
  const int N = model.N;
  if (static_cast<int>(controls.size()) != N)
    throw std::invalid_argument("simulate_one: need one control per step");
  if (noise.dim() != model.n_x())
    throw std::invalid_argument("simulate_one: disturbance sampler dimension mismatch");
  const bool closed = policy.closed_loop();
  if (closed && static_cast<int>(nominal.size()) != N + 1)
    throw std::invalid_argument("simulate_one: closed loop needs the full nominal trajectory");

  SampleTrajectory tr;
  tr.x.reserve(N + 1);
  tr.u.reserve(N);
  tr.saturated.assign(N, false);
  tr.x.push_back(x0);
  for (int t = 0; t < N; ++t) {
    Eigen::VectorXd u = controls[t];
    if (closed) u += policy.K * (tr.x.back() - nominal[t]);
    if (!model.U.contains(u, kBoundaryTol)) {
      tr.saturated[t] = true;
      u = project_onto_polytope(u, model.U);
    }
    Eigen::VectorXd next = model.A_at(t) * tr.x.back() + model.B_at(t) * u + noise.draw(rng);
    tr.u.push_back(std::move(u));
    tr.x.push_back(std::move(next));
  }
  return tr;
}

std::pair<double, double> wilson_interval(int k, int n, double z) {
  if (n < 1) throw std::invalid_argument("wilson_interval: need at least one trial");
  const double p = static_cast<double>(k) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = (z / denom) * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

ValidationReport estimate_pfail(const PlanSolution& plan, const Ccqsp& ccqsp,
                                const StochasticPlantModel& model, const FeedbackPolicy& policy,
                                const InitialCondition& init, const Objective& objective,
                                const SimulationConfig& cfg) {
  if (!plan.schedule.full())
    throw std::invalid_argument("estimate_pfail: plan schedule must assign every event");
  if (cfg.samples < 1) throw std::invalid_argument("estimate_pfail: need at least one sample");
  if (objective.kind == Objective::Kind::LinearControl &&
      objective.linear.size() != static_cast<long>(model.N) * model.n_u())
    throw std::invalid_argument("estimate_pfail: linear objective size mismatch");

  const FlatClauseSet clauses = flatten_constraints(ccqsp, plan.schedule);
  const std::vector<Eigen::VectorXd> nominal = propagate_nominal(model, init.mean, plan.controls);
  const GaussianSampler noise(model.Sigma_w);
  const GaussianSampler start(init.cov);
  const int n_cc = static_cast<int>(ccqsp.chance_constraints.size());
  const int end_step = plan.schedule.step[ccqsp.end_event];

  std::vector<long> violations(n_cc, 0);
  std::vector<long> sat(model.N, 0);
  double cost_sum = 0.0;
  for (int s = 0; s < cfg.samples; ++s) {
    std::mt19937_64 rng = sample_stream(cfg.seed, s);
    const Eigen::VectorXd x0 = init.mean + start.draw(rng);
    const SampleTrajectory tr =
        simulate_one(model, policy, plan.controls, nominal, x0, noise, rng);
    for (int c = 0; c < n_cc; ++c) {
      bool failed = false;
      for (const FlatClause& cl : clauses.per_cc[c]) {
        bool holds = false;
        for (const HalfSpace& d : cl.disjuncts) {
          if (d.h.dot(tr.x[cl.step]) <= d.g + kBoundaryTol) {
            holds = true;
            break;
          }
        }
        if (!holds) {
          failed = true;
          break;
        }
      }
      if (failed) ++violations[c];
    }
    for (int t = 0; t < model.N; ++t)
      if (tr.saturated[t]) ++sat[t];
    cost_sum += realized_cost(objective, tr.u, model.dt, end_step);
  }

  ValidationReport rep;
  rep.samples = cfg.samples;
  rep.seed = cfg.seed;
  rep.per_cc.resize(n_cc);
  for (int c = 0; c < n_cc; ++c) {
    auto& r = rep.per_cc[c];
    r.name = ccqsp.chance_constraints[c].name;
    r.delta = ccqsp.chance_constraints[c].delta;
    r.violations = static_cast<int>(violations[c]);
    r.p_fail = static_cast<double>(violations[c]) / cfg.samples;
    std::tie(r.wilson_lo, r.wilson_hi) = wilson_interval(r.violations, cfg.samples);
    r.pass = r.wilson_hi <= r.delta;
  }
  rep.saturation_freq.assign(model.N, 0.0);
  for (int t = 0; t < model.N; ++t)
    rep.saturation_freq[t] = static_cast<double>(sat[t]) / cfg.samples;
  rep.expected_cost = cost_sum / cfg.samples;
  return rep;
}

} // namespace psulu
