#include "ihmm/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ihmm {

double uniform01(Rng& rng) {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double standard_normal(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  return n(rng);
}

double log_gamma_variate(double shape, Rng& rng) {
  if (!(shape > 0.0)) throw DomainError("gamma shape must be positive");
  if (shape < 1.0) {
    std::gamma_distribution<double> g(shape + 1.0, 1.0);
    return std::log(g(rng)) + std::log(uniform01(rng)) / shape;
  }
  std::gamma_distribution<double> g(shape, 1.0);
  return std::log(g(rng));
}

double gamma_variate(double shape, double rate, Rng& rng) {
  if (!(rate > 0.0)) throw DomainError("gamma rate must be positive");
  return std::exp(log_gamma_variate(shape, rng)) / rate;
}

double beta_variate(double a, double b, Rng& rng) {
  const double la = log_gamma_variate(a, rng);
  const double lb = log_gamma_variate(b, rng);
  const double m = std::max(la, lb);
  return std::exp(la - m) / (std::exp(la - m) + std::exp(lb - m));
}

std::vector<double> dirichlet(std::span<const double> concentration, Rng& rng) {
  std::vector<double> lg(concentration.size());
  for (std::size_t i = 0; i < lg.size(); ++i) lg[i] = log_gamma_variate(concentration[i], rng);
  const double norm = log_sum_exp(lg);
  constexpr double floor = std::numeric_limits<double>::min();
  for (double& v : lg) v = std::max(std::exp(v - norm), floor);
  return lg;
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

std::size_t sample_log_categorical(std::span<const double> log_weights, Rng& rng) {
  const double m = *std::max_element(log_weights.begin(), log_weights.end());
  if (!std::isfinite(m)) throw DomainError("categorical weights are all zero or non-finite");
  double total = 0.0;
  for (double w : log_weights) total += std::exp(w - m);
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    u -= std::exp(log_weights[i] - m);
    if (u <= 0.0) return i;
  }
  // Rounding left a sliver; return the last index with positive weight.
  for (std::size_t i = log_weights.size(); i-- > 0;) {
    if (std::isfinite(log_weights[i])) return i;
  }
  return log_weights.size() - 1;
}

Matrix sample_inverse_wishart(const CholFactor& scale_chol, double dof, Rng& rng) {
  const int p = scale_chol.dim();
  if (!(dof > p - 1)) throw DomainError("inverse-Wishart requires dof > p - 1");
  // W = Sigma^{-1} ~ Wishart(scale^{-1}, dof) = (L^{-T} A)(L^{-T} A)^T with
  // A the Bartlett factor, so Sigma = (L A^{-T})(L A^{-T})^T.
  Matrix a = Matrix::Zero(p, p);
  for (int i = 0; i < p; ++i) {
    std::chi_squared_distribution<double> chi(dof - i);
    a(i, i) = std::sqrt(chi(rng));
    for (int j = 0; j < i; ++j) a(i, j) = standard_normal(rng);
  }
  // A^{-T} is upper triangular: solve A^T X = I.
  Matrix a_inv_t = a.transpose().triangularView<Eigen::Upper>().solve(Matrix::Identity(p, p));
  Matrix m = scale_chol.lower().triangularView<Eigen::Lower>() * a_inv_t;
  Matrix sigma = m * m.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

int sample_table_count(int customers, double concentration, Rng& rng) {
  int tables = 0;
  for (int i = 0; i < customers; ++i) {
    if (uniform01(rng) * (concentration + i) < concentration) ++tables;
  }
  return tables;
}

}  // namespace ihmm
