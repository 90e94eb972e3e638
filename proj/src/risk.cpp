#include "psulu/risk.hpp"

#include <cmath>
#include <stdexcept>

namespace psulu {

namespace {

// Acklam's rational approximation to the standard normal quantile,
// good to ~1e-9 relative; used only as the Newton seed.
double quantile_seed(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  if (p < p_low) {
    double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (p > 1.0 - p_low) {
    double q = std::sqrt(-2.0 * std::log(1.0 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

constexpr double half_sqrt_pi = 0.8862269254527580136490837416706; // sqrt(pi)/2

} // namespace

double inv_erf(double y) {
  if (!(std::abs(y) < 1.0)) throw std::domain_error("inv_erf: |y| must be < 1");
  if (y == 0.0) return 0.0;
  double x = quantile_seed(0.5 * (y + 1.0)) * M_SQRT1_2;
  for (int k = 0; k < 2; ++k) {
    x += (y - std::erf(x)) * half_sqrt_pi * std::exp(x * x);
  }
  return x;
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("norm_quantile: p must be in (0,1)");
  return M_SQRT2 * inv_erf(2.0 * p - 1.0);
}

double safety_margin_sigma(double sigma, double delta) {
  if (!(delta > 0.0 && delta <= 0.5)) throw std::domain_error("safety_margin: delta must be in (0, 0.5]");
  if (sigma <= 0.0) return 0.0;
  return -sigma * M_SQRT2 * inv_erf(2.0 * delta - 1.0);
}

double safety_margin(const Eigen::VectorXd& h, const Eigen::MatrixXd& cov, double delta) {
  double v = h.dot(cov * h);
  return safety_margin_sigma(v > 0.0 ? std::sqrt(v) : 0.0, delta);
}

double saturation_margin(const Eigen::VectorXd& h_u, const Eigen::MatrixXd& state_cov,
                         const Eigen::MatrixXd& gain, double eps) {
  if (gain.size() == 0) return safety_margin_sigma(0.0, eps);
  Eigen::MatrixXd cov_u = gain * state_cov * gain.transpose();
  return safety_margin(h_u, cov_u, eps);
}

double actual_risk_sigma(double slack, double sigma) {
  if (sigma <= 0.0) return slack >= 0.0 ? 0.0 : 1.0;
  return 1.0 - norm_cdf(slack / sigma);
}

double actual_risk(const Eigen::VectorXd& h, double g, const Eigen::VectorXd& mean,
                   const Eigen::MatrixXd& cov) {
  double v = h.dot(cov * h);
  return actual_risk_sigma(g - h.dot(mean), v > 0.0 ? std::sqrt(v) : 0.0);
}

double expected_quadratic(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov,
                          const Eigen::MatrixXd& Q) {
  return mean.dot(Q * mean) + (Q * cov).trace();
}

double expected_abs(double mean, double std) {
  if (std <= 0.0) return std::abs(mean);
  double z = mean / std;
  return std * std::sqrt(2.0 / M_PI) * std::exp(-0.5 * z * z) +
         mean * (1.0 - 2.0 * norm_cdf(-z));
}

double RiskAllocation::budget_lhs(int c) const {
  double s = 0.0;
  for (double d : delta[c]) s += d;
  if (eps.size() > 0) {
    int t_hi = std::min<int>(tcmax[c], static_cast<int>(eps.rows()) - 1);
    for (int t = 0; t <= t_hi; ++t) s += eps.row(t).sum();
  }
  return s;
}

} // namespace psulu
