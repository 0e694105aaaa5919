#pragma once

#include <random>
#include <span>
#include <vector>

#include "ihmm/numkernel.hpp"

namespace ihmm {

/// The single generator used throughout; its name is written into run metadata.
using Rng = std::mt19937_64;
inline constexpr const char* kRngName = "std::mt19937_64";

/// Uniform on the open interval (0, 1).
double uniform01(Rng& rng);
double standard_normal(Rng& rng);

/// ln of a Gamma(shape, 1) draw. Stable for shapes far below 1, where the
/// draw itself underflows.
double log_gamma_variate(double shape, Rng& rng);
/// Gamma(shape, rate) draw.
double gamma_variate(double shape, double rate, Rng& rng);
double beta_variate(double a, double b, Rng& rng);

/// Dirichlet draw. Entries that underflow are clamped to the smallest
/// normal double so every component stays strictly positive.
std::vector<double> dirichlet(std::span<const double> concentration, Rng& rng);

/// Index drawn with probability proportional to exp(log_weights[i]).
std::size_t sample_log_categorical(std::span<const double> log_weights, Rng& rng);

double log_sum_exp(std::span<const double> v);

/// Inverse-Wishart draw, scale-matrix convention: E[Sigma] = scale/(dof - p - 1).
/// Bartlett decomposition of the Wishart on the inverse, then triangular solves.
Matrix sample_inverse_wishart(const CholFactor& scale_chol, double dof, Rng& rng);

/// Draws from the Chinese-restaurant table distribution CRT(customers, concentration).
int sample_table_count(int customers, double concentration, Rng& rng);

}  // namespace ihmm
