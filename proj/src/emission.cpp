#include "ihmm/emission.hpp"

#include <cmath>
#include <numbers>

namespace ihmm {

namespace {
const double kLogPi = std::log(std::numbers::pi);
}

double state_log_marginal(const StateStats& stats, double eta, const CholFactor& sigma0_chol, double v0) {
  const int p = sigma0_chol.dim();
  if (!(v0 > p - 1)) throw DomainError("v0 must exceed p - 1");
  if (stats.n == 0) return 0.0;
  const double n = stats.n;
  const double log_prior_det = p * std::log(eta) + logdet(sigma0_chol);
  return -0.5 * n * p * kLogPi - 0.5 * p * stats.log_sigma_sum + log_multigamma(p, 0.5 * (v0 + n)) -
         log_multigamma(p, 0.5 * v0) + 0.5 * v0 * log_prior_det - 0.5 * (v0 + n) * logdet(stats.scatter_chol);
}

double assign_log_predictive(const Eigen::Ref<const Vector>& x, double sigma_sq, const StateStats& stats,
                             double /*eta*/, const CholFactor& sigma0_chol, double v0) {
  const int p = sigma0_chol.dim();
  const double a = 0.5 * (v0 + stats.n + 1);
  const double q = quadform(stats.scatter_chol, x) / sigma_sq;
  // ln Gamma_p(a) - ln Gamma_p(a - 1/2) telescopes to a single ratio.
  return -0.5 * p * kLogPi - 0.5 * p * std::log(sigma_sq) + std::lgamma(a) - std::lgamma(a - 0.5 * p) -
         0.5 * logdet(stats.scatter_chol) - a * std::log1p(q);
}

double sigma_integrated_logdensity(const Eigen::Ref<const Vector>& x, const CholFactor& sigma_chol) {
  const int p = sigma_chol.dim();
  const double q = quadform(sigma_chol, x);
  if (!(q > 0.0)) throw ZeroVector();
  return std::lgamma(0.5 * p) - 0.5 * p * kLogPi - 0.5 * logdet(sigma_chol) - 0.5 * p * std::log(q);
}

double gaussian_logdensity(const Eigen::Ref<const Vector>& x, double sigma_sq, const CholFactor& sigma_chol) {
  const int p = sigma_chol.dim();
  const double q = quadform(sigma_chol, x) / sigma_sq;
  return -0.5 * p * std::log(2.0 * std::numbers::pi * sigma_sq) - 0.5 * logdet(sigma_chol) - 0.5 * q;
}

double rescale_log_ratio(const Eigen::Ref<const Vector>& x, double old_sigma_sq, double new_sigma_sq,
                         const StateStats& stats, double v0) {
  const int p = static_cast<int>(x.size());
  // A' = A + c x x^T with c = 1/new - 1/old, so ln|A'| = ln|A| + ln(1 + c x^T A^{-1} x).
  const double c = 1.0 / new_sigma_sq - 1.0 / old_sigma_sq;
  const double q = quadform(stats.scatter_chol, x);
  return -0.5 * p * (std::log(new_sigma_sq) - std::log(old_sigma_sq)) -
         0.5 * (v0 + stats.n) * std::log1p(c * q);
}

}  // namespace ihmm
