#pragma once

// Collapsed likelihoods of the Normal / inverse-Wishart pair.
//
// Parameterization: Sigma ~ IW(eta * Sigma0, v0) with eta*Sigma0 the scale
// matrix, so E[Sigma] = eta*Sigma0 / (v0 - p - 1) when v0 > p + 1.

#include "ihmm/model.hpp"
#include "ihmm/numkernel.hpp"

namespace ihmm {

/// ln of the state's data likelihood with its covariance integrated out:
///   -(n p/2) ln pi - (p/2) sum ln sigma_t^2 + ln Gamma_p((v0+n)/2) - ln Gamma_p(v0/2)
///   + (v0/2) ln|eta Sigma0| - ((v0+n)/2) ln|eta Sigma0 + S|
double state_log_marginal(const StateStats& stats, double eta, const CholFactor& sigma0_chol, double v0);

/// state_log_marginal(stats + x) - state_log_marginal(stats), in O(p^2) by the
/// matrix determinant lemma on the maintained factor.
double assign_log_predictive(const Eigen::Ref<const Vector>& x, double sigma_sq, const StateStats& stats,
                             double eta, const CholFactor& sigma0_chol, double v0);

/// ln of the integral over sigma^2 of N(x; 0, sigma^2 Sigma) / sigma^2:
///   ln Gamma(p/2) - (p/2) ln pi - (1/2) ln|Sigma| - (p/2) ln(x^T Sigma^{-1} x).
/// Invariant to rescaling Sigma; homogeneous of degree -p in x.
double sigma_integrated_logdensity(const Eigen::Ref<const Vector>& x, const CholFactor& sigma_chol);

/// ln N(x; 0, sigma_sq * Sigma).
double gaussian_logdensity(const Eigen::Ref<const Vector>& x, double sigma_sq, const CholFactor& sigma_chol);

/// Change in the state's collapsed marginal when the scale of one of its
/// members moves from old_sigma_sq to new_sigma_sq (x must belong to the state).
double rescale_log_ratio(const Eigen::Ref<const Vector>& x, double old_sigma_sq, double new_sigma_sq,
                         const StateStats& stats, double v0);

}  // namespace ihmm
